#include "cvfusion/baselines.hpp"

#include "cvfusion/error.hpp"
#include "cvfusion/spectral.hpp"

#include <cmath>
#include <numbers>

namespace cvfusion {

HaarDecomposition haar_dwt(std::span<const double> x, int levels) {
    const std::size_t n = x.size();
    if (n < 2 || (n & (n - 1)) != 0) throw ParamError("haar_dwt: length must be a power of two");
    if (levels < 1 || levels > 8) throw ParamError("haar_dwt: levels must be in [1, 8]");
    if ((n >> levels) < 1) throw ParamError("haar_dwt: too many levels for the input length");

    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    HaarDecomposition out;
    std::vector<double> approx(x.begin(), x.end());
    for (int level = 0; level < levels; ++level) {
        const std::size_t half = approx.size() / 2;
        std::vector<double> next(half), detail(half);
        for (std::size_t i = 0; i < half; ++i) {
            next[i] = (approx[2 * i] + approx[2 * i + 1]) * inv_sqrt2;
            detail[i] = (approx[2 * i] - approx[2 * i + 1]) * inv_sqrt2;
        }
        out.details.push_back(std::move(detail));
        approx = std::move(next);
    }
    out.approximation = std::move(approx);
    return out;
}

std::vector<double> haar_idwt(const HaarDecomposition& decomposition) {
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    std::vector<double> approx = decomposition.approximation;
    for (auto it = decomposition.details.rbegin(); it != decomposition.details.rend(); ++it) {
        const auto& detail = *it;
        if (detail.size() != approx.size()) throw ParamError("haar_idwt: inconsistent level sizes");
        std::vector<double> up(approx.size() * 2);
        for (std::size_t i = 0; i < approx.size(); ++i) {
            up[2 * i] = (approx[i] + detail[i]) * inv_sqrt2;
            up[2 * i + 1] = (approx[i] - detail[i]) * inv_sqrt2;
        }
        approx = std::move(up);
    }
    return approx;
}

WtFeatures wt_features(const BeatSet& beats, int levels) {
    if (beats.beats.empty()) throw ParamError("wt_features: empty beat set");
    std::vector<double> sum(static_cast<std::size_t>(levels) + 1, 0.0);
    for (const auto& beat : beats.beats) {
        const auto dec = haar_dwt(beat, levels);
        std::vector<double> energy(sum.size(), 0.0);
        double total = 0.0;
        for (int l = 0; l < levels; ++l) {
            for (double d : dec.details[l]) energy[l] += d * d;
            total += energy[l];
        }
        for (double a : dec.approximation) energy[levels] += a * a;
        total += energy[levels];
        if (!(total > 0.0)) continue;
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += energy[i] / total;
    }
    double total = 0.0;
    for (double v : sum) total += v;
    if (!(total > 0.0)) throw ParamError("wt_features: beats carry no energy");
    for (double& v : sum) v /= total;
    return WtFeatures{std::move(sum)};
}

HogFeatures hog_features(const GrayImage& image, int cell, int bins) {
    if (cell < 2 || bins < 2) throw ParamError("hog_features: bad cell size or bin count");
    const GrayImage canon = canonical_image(image);
    const int w = canon.width;
    const int h = canon.height;
    if (w % cell != 0 || h % cell != 0 || w / cell < 2 || h / cell < 2) {
        throw ParamError("hog_features: image must tile into at least 2x2 cells");
    }

    HogFeatures out;
    out.cells_x = w / cell;
    out.cells_y = h / cell;
    out.bins = bins;

    std::vector<double> hist(static_cast<std::size_t>(out.cells_x) * out.cells_y * bins, 0.0);
    const double bin_width = 180.0 / bins;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = canon.at(std::min(x + 1, w - 1), y) - canon.at(std::max(x - 1, 0), y);
            const double gy = canon.at(x, std::min(y + 1, h - 1)) - canon.at(x, std::max(y - 1, 0));
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
            if (angle < 0.0) angle += 180.0;
            if (angle >= 180.0) angle -= 180.0;
            const double pos = angle / bin_width;
            const int b0 = static_cast<int>(std::floor(pos)) % bins;
            const int b1 = (b0 + 1) % bins;
            const double frac = pos - std::floor(pos);
            const std::size_t base = (static_cast<std::size_t>(y / cell) * out.cells_x + x / cell) * bins;
            hist[base + b0] += mag * (1.0 - frac);
            hist[base + b1] += mag * frac;
        }
    }

    constexpr double eps = 1e-6;
    out.descriptor.reserve(static_cast<std::size_t>(out.blocks_x()) * out.blocks_y() * out.block_size());
    std::vector<double> block(static_cast<std::size_t>(out.block_size()));
    for (int by = 0; by < out.blocks_y(); ++by) {
        for (int bx = 0; bx < out.blocks_x(); ++bx) {
            std::size_t k = 0;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const std::size_t base = (static_cast<std::size_t>(by + dy) * out.cells_x + bx + dx) * bins;
                    for (int b = 0; b < bins; ++b) block[k++] = hist[base + b];
                }
            }
            double ss = 0.0;
            for (double v : block) ss += v * v;
            const double norm = std::sqrt(ss + eps * eps);
            for (double v : block) out.descriptor.push_back(v / norm);
        }
    }
    return out;
}

}  // namespace cvfusion
