#include "cvfusion/spectral.hpp"

#include "cvfusion/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

namespace cvfusion {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 transform; sign = -1 forward, +1 backward.
void radix2(std::vector<Complex>& a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    // Twiddles evaluated directly (no recurrence) to keep rounding at ~1 ulp.
    std::vector<Complex> twiddle(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double angle = sign * kTwoPi * static_cast<double>(k) / static_cast<double>(n);
        twiddle[k] = Complex(std::cos(angle), std::sin(angle));
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const Complex u = a[i + k];
                const Complex v = a[i + k + half] * twiddle[k * stride];
                a[i + k] = u + v;
                a[i + k + half] = u - v;
            }
        }
    }
}

// Bluestein: with c_m = exp(sign i pi m^2 / N), X[k] = c_k * sum_n (x[n] c_n) conj(c_{k-n}).
std::vector<Complex> bluestein(std::span<const Complex> x, int sign) {
    const std::size_t n = x.size();
    const std::size_t m = std::bit_ceil(2 * n - 1);
    std::vector<Complex> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2N keeps the angle argument small and exact.
        const unsigned long long k2 = (static_cast<unsigned long long>(k) * k) % (2ULL * n);
        const double angle = std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = Complex(std::cos(angle), sign * std::sin(angle));
    }
    std::vector<Complex> a(m), b(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
        b[k] = std::conj(chirp[k]);
        b[m - k] = std::conj(chirp[k]);
    }
    radix2(a, -1);
    radix2(b, -1);
    for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
    radix2(a, +1);
    const double inv_m = 1.0 / static_cast<double>(m);
    std::vector<Complex> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * inv_m * chirp[k];
    return out;
}

std::vector<Complex> transform(std::span<const Complex> x, int sign) {
    if (x.empty()) throw ParamError("fft: empty input");
    if (x.size() == 1) return {x[0]};
    if (is_pow2(x.size())) {
        std::vector<Complex> a(x.begin(), x.end());
        radix2(a, sign);
        return a;
    }
    return bluestein(x, sign);
}

}  // namespace

ComplexSeries fft(std::span<const Complex> x) { return transform(x, -1); }

ComplexSeries fft(std::span<const double> x) {
    std::vector<Complex> c(x.begin(), x.end());
    return transform(c, -1);
}

ComplexSeries ifft(std::span<const Complex> x) {
    auto out = transform(x, +1);
    const double inv = 1.0 / static_cast<double>(out.size());
    for (auto& v : out) v *= inv;
    return out;
}

ComplexGrid fft2(int width, int height, std::span<const double> values) {
    if (width < 1 || height < 1) throw ParamError("fft2: degenerate dimensions");
    if (values.size() != static_cast<std::size_t>(width) * height) throw ParamError("fft2: size mismatch");
    ComplexGrid grid;
    grid.width = width;
    grid.height = height;
    grid.data.assign(values.begin(), values.end());

    for (int y = 0; y < height; ++y) {
        auto row = std::span<Complex>(grid.data).subspan(static_cast<std::size_t>(y) * width, width);
        const auto out = fft(std::span<const Complex>(row));
        std::copy(out.begin(), out.end(), row.begin());
    }
    std::vector<Complex> line(static_cast<std::size_t>(height));
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) line[y] = grid.data[static_cast<std::size_t>(y) * width + x];
        const auto out = fft(std::span<const Complex>(line));
        for (int y = 0; y < height; ++y) grid.data[static_cast<std::size_t>(y) * width + x] = out[y];
    }
    return grid;
}

ComplexGrid fft2(const GrayImage& image) { return fft2(image.width, image.height, image.pixels); }

GrayImage resample_bilinear(const GrayImage& image, int width, int height) {
    if (image.width < 1 || image.height < 1 || width < 1 || height < 1) {
        throw ParamError("resample: degenerate dimensions");
    }
    if (image.width == width && image.height == height) return image;
    GrayImage out;
    out.id = image.id;
    out.width = width;
    out.height = height;
    out.pixels.resize(static_cast<std::size_t>(width) * height);
    const double sx = static_cast<double>(image.width) / width;
    const double sy = static_cast<double>(image.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double wx = fx - x0;
            const double top = image.at(x0, y0) * (1.0 - wx) + image.at(x1, y0) * wx;
            const double bottom = image.at(x0, y1) * (1.0 - wx) + image.at(x1, y1) * wx;
            out.at(x, y) = std::clamp(top * (1.0 - wy) + bottom * wy, 0.0, 1.0);
        }
    }
    return out;
}

GrayImage canonical_image(const GrayImage& image) {
    validate(image);
    return resample_bilinear(image, kCanonicalImageSide, kCanonicalImageSide);
}

void validate(const Spectrum& spectrum) {
    if (spectrum.weights.empty() || spectrum.weights.size() != spectrum.centers.size()) {
        throw ParamError("spectrum: weights and centers must be non-empty and equally sized");
    }
    double total = 0.0;
    for (double w : spectrum.weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ParamError("spectrum: negative or non-finite weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ParamError("spectrum: weights do not sum to 1");
    for (std::size_t i = 1; i < spectrum.centers.size(); ++i) {
        if (!(spectrum.centers[i] > spectrum.centers[i - 1])) {
            throw ParamError("spectrum: centers must be strictly increasing");
        }
    }
}

Spectrum normalize(std::vector<double> weights, std::vector<double> centers) {
    if (weights.size() != centers.size() || weights.empty()) {
        throw ParamError("normalize: weights and centers must be non-empty and equally sized");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ParamError("normalize: negative or non-finite weight");
        total += w;
    }
    if (!(total > 0.0)) throw ParamError("normalize: zero mass");
    for (std::size_t i = 1; i < centers.size(); ++i) {
        if (!(centers[i] > centers[i - 1])) throw ParamError("normalize: centers must be strictly increasing");
    }
    for (double& w : weights) w /= total;
    return Spectrum{std::move(weights), std::move(centers), false};
}

Spectrum beat_avg_spectrum(const BeatSet& beats, int nbins) {
    if (beats.beats.empty()) throw ParamError("beat_avg_spectrum: empty beat set");
    const std::size_t len = beats.beats.front().size();
    if (nbins < 1 || static_cast<std::size_t>(nbins) > len / 2) {
        throw ParamError("beat_avg_spectrum: nbins must be in [1, beat_length / 2]");
    }
    std::vector<double> sum(static_cast<std::size_t>(nbins), 0.0);
    std::size_t used = 0;
    for (const auto& beat : beats.beats) {
        if (beat.size() != len) throw ParamError("beat_avg_spectrum: beats differ in length");
        const auto spec = fft(std::span<const double>(beat));
        std::vector<double> mag(static_cast<std::size_t>(nbins));
        double mass = 0.0;
        for (int k = 1; k <= nbins; ++k) {
            mag[k - 1] = std::abs(spec[k]);
            mass += mag[k - 1];
        }
        if (!(mass > 0.0)) continue;
        for (int k = 0; k < nbins; ++k) sum[k] += mag[k] / mass;
        ++used;
    }
    if (used == 0) throw ParamError("beat_avg_spectrum: no beat carries AC energy");
    std::vector<double> centers(static_cast<std::size_t>(nbins));
    for (int k = 1; k <= nbins; ++k) centers[k - 1] = static_cast<double>(k) / static_cast<double>(len);
    return normalize(std::move(sum), std::move(centers));
}

Spectrum radial_spectrum(const GrayImage& image, int nbins) {
    if (nbins < 1) throw ParamError("radial_spectrum: nbins must be positive");
    const GrayImage canon = canonical_image(image);
    const int n = canon.width;
    const int half = n / 2;
    const double r_max = half * std::numbers::sqrt2;

    const ComplexGrid grid = fft2(canon);
    std::vector<double> bins(static_cast<std::size_t>(nbins), 0.0);
    double peak_ac = 0.0;
    for (int v = 0; v < n; ++v) {
        const int cv = v < half ? v : v - n;
        for (int u = 0; u < n; ++u) {
            if (u == 0 && v == 0) continue;
            const int cu = u < half ? u : u - n;
            const double r = std::sqrt(static_cast<double>(cu * cu + cv * cv));
            const int bin = std::min(nbins - 1, static_cast<int>(std::floor(nbins * r / r_max)));
            const double mag = std::abs(grid.at(u, v));
            bins[bin] += mag;
            peak_ac = std::max(peak_ac, mag);
        }
    }

    std::vector<double> centers(static_cast<std::size_t>(nbins));
    for (int b = 0; b < nbins; ++b) centers[b] = (b + 0.5) * r_max / nbins;

    // AC components below ~1e-9 intensity amplitude are rounding residue.
    const double floor_mag = 1e-9 * static_cast<double>(n) * n;
    if (peak_ac <= floor_mag) {
        std::vector<double> one_hot(static_cast<std::size_t>(nbins), 0.0);
        one_hot[0] = 1.0;
        return Spectrum{std::move(one_hot), std::move(centers), true};
    }
    return normalize(std::move(bins), std::move(centers));
}

double high_frequency_ratio(const Spectrum& spectrum) {
    const std::size_t half = spectrum.weights.size() / 2;
    double hi = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < spectrum.weights.size(); ++i) {
        total += spectrum.weights[i];
        if (i >= half) hi += spectrum.weights[i];
    }
    return total > 0.0 ? hi / total : 0.0;
}

}  // namespace cvfusion
