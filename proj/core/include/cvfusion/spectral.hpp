#pragma once

#include <complex>
#include <span>
#include <vector>

#include "cvfusion/dataio.hpp"
#include "cvfusion/ecg_prep.hpp"

namespace cvfusion {

using Complex = std::complex<double>;
using ComplexSeries = std::vector<Complex>;

// Row-major H x W grid of complex coefficients.
struct ComplexGrid {
    int width = 0;
    int height = 0;
    std::vector<Complex> data;

    Complex at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
};

// Discrete probability distribution over strictly increasing bin centers.
struct Spectrum {
    std::vector<double> weights;
    std::vector<double> centers;
    // Set when the source had no energy to distribute (constant image); the
    // weights are then one-hot on the first bin.
    bool degenerate = false;
};

// Throws ParamError unless weights are non-negative, sum to 1 within 1e-9,
// and centers are strictly increasing with matching length.
void validate(const Spectrum& spectrum);

/// Unnormalized DFT with a negative exponent:
///   X[k] = sum_n x[n] exp(-2 pi i k n / N).
/// Power-of-two lengths use iterative radix-2; other lengths go through
/// Bluestein's chirp-z so the result is the exact length-N transform.
/// Throws ParamError on empty input.
ComplexSeries fft(std::span<const Complex> x);
ComplexSeries fft(std::span<const double> x);

// Inverse with 1/N scaling.
ComplexSeries ifft(std::span<const Complex> x);

/// Unnormalized 2D DFT by row-column decomposition at the grid's own size.
ComplexGrid fft2(int width, int height, std::span<const double> values);
ComplexGrid fft2(const GrayImage& image);

inline constexpr int kCanonicalImageSide = 256;
inline constexpr int kEcgSpectrumBins = 128;
inline constexpr int kRadialBins = 64;

/// Bilinear resampling with pixel-center alignment; identity when the size
/// already matches.
GrayImage resample_bilinear(const GrayImage& image, int width, int height);

// Validates (sides >= 16, intensities in [0,1]) and resamples to 256 x 256.
GrayImage canonical_image(const GrayImage& image);

/// Divides by the total mass. Throws ParamError on negative weights, zero
/// mass, or mismatched/unsorted centers.
Spectrum normalize(std::vector<double> weights, std::vector<double> centers);

/// Record-level ECG spectrum: per beat, |FFT| over bins 1..nbins (DC
/// excluded) normalized to unit mass; averaged across beats and
/// renormalized. Centers are k / beat_length.
/// Throws ParamError on an empty set.
Spectrum beat_avg_spectrum(const BeatSet& beats, int nbins = kEcgSpectrumBins);

/// Rotation-invariant profile of the 2D magnitude spectrum of the canonical
/// 256 x 256 image: DC zeroed, each centered frequency (u, v) falls into bin
/// floor(nbins * r / r_max) with r_max = 128 * sqrt(2); centers are bin
/// midpoints in cycles. A constant image yields the degenerate spectrum.
Spectrum radial_spectrum(const GrayImage& image, int nbins = kRadialBins);

// Mass in the upper half of the bins.
double high_frequency_ratio(const Spectrum& spectrum);

}  // namespace cvfusion
