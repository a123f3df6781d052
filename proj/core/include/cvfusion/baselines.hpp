#pragma once

#include <span>
#include <vector>

#include "cvfusion/dataio.hpp"
#include "cvfusion/ecg_prep.hpp"

namespace cvfusion {

struct HaarDecomposition {
    std::vector<std::vector<double>> details;  // details[0] is the finest level
    std::vector<double> approximation;
};

/// Orthonormal Haar analysis:
///   approx[i] = (x[2i] + x[2i+1]) / sqrt(2), detail[i] = (x[2i] - x[2i+1]) / sqrt(2),
/// applied recursively to the approximation.
/// Throws ParamError for non-power-of-two lengths, levels outside [1, 8], or
/// more levels than the length supports.
HaarDecomposition haar_dwt(std::span<const double> x, int levels);

// Exact inverse of haar_dwt.
std::vector<double> haar_idwt(const HaarDecomposition& decomposition);

struct WtFeatures {
    // levels detail energies (finest first) followed by the approximation energy; sums to 1.
    std::vector<double> level_energies;
};

/// Mean over beats of per-level Haar energies, normalized to unit sum.
/// Throws ParamError on an empty beat set.
WtFeatures wt_features(const BeatSet& beats, int levels = 5);

struct HogFeatures {
    // Concatenated 2x2-cell blocks (stride one cell), each L2 normalized.
    std::vector<double> descriptor;
    int cells_x = 0;
    int cells_y = 0;
    int bins = 0;

    int blocks_x() const { return cells_x - 1; }
    int blocks_y() const { return cells_y - 1; }
    int block_size() const { return 4 * bins; }
};

/// Histogram of oriented gradients on the canonical 256 x 256 image:
/// central-difference gradients with replicated borders, unsigned
/// orientation in [0, 180) with bin b centered at b * 180 / bins, magnitude
/// votes split linearly between the two nearest bins, and overlapping 2x2
/// block normalization v / sqrt(|v|^2 + eps^2) with eps = 1e-6.
HogFeatures hog_features(const GrayImage& image, int cell = 32, int bins = 9);

}  // namespace cvfusion
