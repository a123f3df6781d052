#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "cvfusion/error.hpp"
#include "cvfusion/spectral.hpp"
#include "support/oracles.hpp"

using namespace cvfusion;

namespace {

std::vector<Complex> random_complex(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist;
    std::vector<Complex> x(n);
    for (auto& v : x) v = Complex(dist(gen), dist(gen));
    return x;
}

GrayImage image_from(int w, int h, const std::function<double(int, int)>& f) {
    GrayImage img;
    img.width = w;
    img.height = h;
    img.pixels.resize(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = f(x, y);
    return img;
}

GrayImage random_image(int w, int h, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return image_from(w, h, [&](int, int) { return dist(gen); });
}

GrayImage rotate90(const GrayImage& img) {
    // (x, y) -> (h - 1 - y, x)
    GrayImage out;
    out.width = img.height;
    out.height = img.width;
    out.pixels.resize(img.pixels.size());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(img.height - 1 - y, x) = img.at(x, y);
    return out;
}

GrayImage transpose(const GrayImage& img) {
    GrayImage out;
    out.width = img.height;
    out.height = img.width;
    out.pixels.resize(img.pixels.size());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(y, x) = img.at(x, y);
    return out;
}

GrayImage horizontal_cosine(int period) {
    return image_from(256, 256, [&](int x, int) { return 0.5 + 0.4 * std::cos(2.0 * std::numbers::pi * x / period); });
}

BeatSet beats_of(const std::vector<std::vector<double>>& windows) {
    BeatSet set;
    set.beats = windows;
    return set;
}

std::vector<double> cosine_beat(int bin) {
    std::vector<double> b(kBeatLength);
    for (int i = 0; i < kBeatLength; ++i) b[i] = std::cos(2.0 * std::numbers::pi * bin * i / kBeatLength);
    return b;
}

void expect_valid(const Spectrum& s) {
    double sum = 0.0;
    for (double w : s.weights) {
        EXPECT_GE(w, 0.0);
        sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_NO_THROW(validate(s));
}

}  // namespace

// ---------------------------------------------------------------------------
// 1D transform

TEST(Fft, ConstantSignal) {
    const auto X = fft(std::vector<double>{1, 1, 1, 1});
    ASSERT_EQ(X.size(), 4u);
    EXPECT_NEAR(std::abs(X[0] - Complex(4, 0)), 0.0, 1e-12);
    for (int k = 1; k < 4; ++k) EXPECT_NEAR(std::abs(X[k]), 0.0, 1e-12);
}

TEST(Fft, NyquistTone) {
    const auto X = fft(std::vector<double>{1, -1, 1, -1});
    EXPECT_NEAR(std::abs(X[0]), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(X[1]), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(X[2] - Complex(4, 0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(X[3]), 0.0, 1e-12);
}

TEST(Fft, EmptyInput) {
    EXPECT_THROW(fft(std::vector<double>{}), ParamError);
    EXPECT_THROW(fft(std::vector<Complex>{}), ParamError);
}

TEST(Fft, MatchesNaiveDftAtLength256) {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> dist;
    std::vector<double> x(256);
    for (auto& v : x) v = dist(gen);
    std::vector<Complex> xc(x.begin(), x.end());
    EXPECT_LT(oracle::max_rel_error(fft(x), oracle::naive_dft(xc)), 1e-9);
}

TEST(Fft, MatchesNaiveDftAtOtherLengths) {
    for (std::size_t n : {1u, 2u, 3u, 5u, 7u, 12u, 100u, 127u, 360u, 1000u}) {
        const auto x = random_complex(n, n);
        EXPECT_LT(oracle::max_rel_error(fft(x), oracle::naive_dft(x)), 1e-9) << "n=" << n;
    }
}

TEST(Fft, Parseval) {
    for (std::size_t n : {16u, 250u, 1024u, 3000u, 4096u}) {
        const auto x = random_complex(n, 100 + n);
        const auto X = fft(x);
        double time_energy = 0.0;
        double freq_energy = 0.0;
        for (const auto& v : x) time_energy += std::norm(v);
        for (const auto& v : X) freq_energy += std::norm(v);
        EXPECT_NEAR(freq_energy / n / time_energy, 1.0, 1e-9) << "n=" << n;
    }
}

TEST(Fft, Linearity) {
    for (std::size_t n : {64u, 77u}) {
        const auto x = random_complex(n, 1);
        const auto y = random_complex(n, 2);
        const Complex a(1.5, -0.3);
        const Complex b(-0.7, 2.0);
        std::vector<Complex> combo(n);
        for (std::size_t i = 0; i < n; ++i) combo[i] = a * x[i] + b * y[i];
        const auto X = fft(x);
        const auto Y = fft(y);
        std::vector<Complex> expected(n);
        for (std::size_t i = 0; i < n; ++i) expected[i] = a * X[i] + b * Y[i];
        EXPECT_LT(oracle::max_rel_error(fft(combo), expected), 1e-9);
    }
}

TEST(Fft, InverseRecoversInput) {
    for (std::size_t n : {8u, 256u, 99u, 4096u}) {
        const auto x = random_complex(n, 7 * n);
        EXPECT_LT(oracle::max_rel_error(ifft(fft(x)), x), 1e-9) << "n=" << n;
    }
}

// ---------------------------------------------------------------------------
// 2D transform

TEST(Fft2, ConstantImage) {
    const double c = 0.37;
    const auto F = fft2(image_from(256, 256, [&](int, int) { return c; }));
    EXPECT_NEAR(std::abs(F.at(0, 0)), c * 256 * 256, 1e-6);
    double other = 0.0;
    for (int v = 0; v < 256; ++v)
        for (int u = 0; u < 256; ++u)
            if (u || v) other = std::max(other, std::abs(F.at(u, v)));
    EXPECT_LT(other, 1e-6);
}

TEST(Fft2, HorizontalCosinePeriodEight) {
    const auto F = fft2(horizontal_cosine(8));
    const double peak = std::abs(F.at(32, 0));
    EXPECT_NEAR(peak, 0.4 * 256 * 256 / 2, 1e-6 * peak);
    EXPECT_NEAR(std::abs(F.at(256 - 32, 0)), peak, 1e-6 * peak);
    double other = 0.0;
    for (int v = 0; v < 256; ++v)
        for (int u = 0; u < 256; ++u)
            if ((u || v) && !(v == 0 && (u == 32 || u == 224))) other = std::max(other, std::abs(F.at(u, v)));
    EXPECT_LT(other / peak, 1e-6);
}

TEST(Fft2, MatchesDirectDoubleSum) {
    const auto img = random_image(32, 32, 3);
    const auto F = fft2(img);
    EXPECT_LT(oracle::max_rel_error(F.data, oracle::naive_dft2(32, 32, img.pixels)), 1e-9);
    const auto rect = random_image(20, 12, 4);
    EXPECT_LT(oracle::max_rel_error(fft2(rect).data, oracle::naive_dft2(20, 12, rect.pixels)), 1e-9);
}

TEST(Fft2, DegenerateDimensions) {
    EXPECT_THROW(fft2(0, 4, std::vector<double>{}), ParamError);
    EXPECT_THROW(fft2(2, 2, std::vector<double>{1, 2, 3}), ParamError);
}

TEST(CanonicalImage, ResamplesAndValidates) {
    const auto img = canonical_image(random_image(64, 48, 8));
    EXPECT_EQ(img.width, 256);
    EXPECT_EQ(img.height, 256);
    for (double p : img.pixels) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
    }
    EXPECT_THROW(canonical_image(random_image(8, 8, 1)), ParamError);
    const auto same = random_image(256, 256, 2);
    EXPECT_EQ(canonical_image(same).pixels, same.pixels);
}

// ---------------------------------------------------------------------------
// ECG spectrum

TEST(BeatSpectrum, SingleToneIsOneHot) {
    const auto s = beat_avg_spectrum(beats_of({cosine_beat(10)}));
    ASSERT_EQ(s.weights.size(), 128u);
    expect_valid(s);
    EXPECT_NEAR(s.weights[9], 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(s.centers[9], 10.0 / 256.0);
    EXPECT_DOUBLE_EQ(s.centers[0], 1.0 / 256.0);
    EXPECT_DOUBLE_EQ(s.centers[127], 128.0 / 256.0);
}

TEST(BeatSpectrum, AveragingIsIdempotent) {
    std::mt19937_64 gen(9);
    std::normal_distribution<double> dist;
    std::vector<double> beat(kBeatLength);
    for (auto& v : beat) v = dist(gen);
    const auto one = beat_avg_spectrum(beats_of({beat}));
    const auto two = beat_avg_spectrum(beats_of({beat, beat}));
    for (std::size_t i = 0; i < one.weights.size(); ++i) EXPECT_NEAR(one.weights[i], two.weights[i], 1e-12);
}

TEST(BeatSpectrum, TwoTonesSplitEvenly) {
    const auto s = beat_avg_spectrum(beats_of({cosine_beat(10), cosine_beat(20)}));
    EXPECT_NEAR(s.weights[9], 0.5, 1e-9);
    EXPECT_NEAR(s.weights[19], 0.5, 1e-9);
    expect_valid(s);
}

TEST(BeatSpectrum, EmptySet) { EXPECT_THROW(beat_avg_spectrum(BeatSet{}), ParamError); }

// ---------------------------------------------------------------------------
// Radial spectrum

TEST(RadialSpectrum, ConstantImageIsDegenerate) {
    const auto s = radial_spectrum(image_from(64, 64, [](int, int) { return 0.4; }));
    EXPECT_TRUE(s.degenerate);
    ASSERT_EQ(s.weights.size(), 64u);
    EXPECT_EQ(s.weights[0], 1.0);
    for (std::size_t i = 1; i < s.weights.size(); ++i) EXPECT_EQ(s.weights[i], 0.0);
}

TEST(RadialSpectrum, CosineLandsInRadius32Bin) {
    const auto s = radial_spectrum(horizontal_cosine(8));
    const int bin = static_cast<int>(std::floor(64 * 32.0 / (128.0 * std::numbers::sqrt2)));
    EXPECT_FALSE(s.degenerate);
    EXPECT_NEAR(s.weights[bin], 1.0, 1e-6);
    expect_valid(s);
}

TEST(RadialSpectrum, CentersAreBinMidpoints) {
    const auto s = radial_spectrum(random_image(32, 32, 5));
    const double width = 128.0 * std::numbers::sqrt2 / 64;
    for (int b = 0; b < 64; ++b) EXPECT_NEAR(s.centers[b], (b + 0.5) * width, 1e-12);
}

TEST(RadialSpectrum, RotationAndTranspositionInvariance) {
    const auto img = random_image(256, 256, 11);
    const auto base = radial_spectrum(img);
    expect_valid(base);
    const auto r90 = radial_spectrum(rotate90(img));
    const auto r180 = radial_spectrum(rotate90(rotate90(img)));
    const auto tr = radial_spectrum(transpose(img));
    for (std::size_t i = 0; i < base.weights.size(); ++i) {
        EXPECT_NEAR(r90.weights[i], base.weights[i], 1e-9);
        EXPECT_NEAR(r180.weights[i], base.weights[i], 1e-9);
        EXPECT_NEAR(tr.weights[i], base.weights[i], 1e-9);
    }
}

TEST(HighFrequencyRatio, UpperHalfMass) {
    const auto s = normalize({1, 1, 1, 1}, {1, 2, 3, 4});
    EXPECT_NEAR(high_frequency_ratio(s), 0.5, 1e-15);
}

// ---------------------------------------------------------------------------

TEST(Normalize, Examples) {
    EXPECT_EQ(normalize({2, 2}, {0, 1}).weights, (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(normalize({1, 0, 3}, {0, 1, 2}).weights, (std::vector<double>{0.25, 0.0, 0.75}));
    EXPECT_THROW(normalize({0, 0}, {0, 1}), ParamError);
    EXPECT_THROW(normalize({1, -1, 2}, {0, 1, 2}), ParamError);
    EXPECT_THROW(normalize({1, 2}, {1, 0}), ParamError);
}
