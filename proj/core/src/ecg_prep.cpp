#include "cvfusion/ecg_prep.hpp"

#include "cvfusion/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace cvfusion {

namespace {

// Unit-DC Hamming-windowed sinc lowpass with the given odd length.
std::vector<double> lowpass(std::size_t taps, double cutoff, double fs) {
    const auto m = static_cast<double>(taps - 1) / 2.0;
    const double fc = cutoff / fs;  // cycles per sample
    std::vector<double> h(taps);
    for (std::size_t i = 0; i < taps; ++i) {
        const double t = static_cast<double>(i) - m;
        const double sinc = t == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * t) / (std::numbers::pi * t);
        const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                                     static_cast<double>(taps - 1));
        h[i] = sinc * window;
    }
    double sum = 0.0;
    for (double v : h) sum += v;
    for (double& v : h) v /= sum;
    return h;
}

// Whole-sample symmetric reflection (x[-1] = x[1]) folded until in range.
std::size_t reflect_index(long long i, std::size_t n) {
    if (n == 1) return 0;
    const long long period = 2 * static_cast<long long>(n - 1);
    i %= period;
    if (i < 0) i += period;
    if (i >= static_cast<long long>(n)) i = period - i;
    return static_cast<std::size_t>(i);
}

}  // namespace

FilterKernel design_bandpass(double fs, double lo, double hi) {
    if (!(fs > 0.0) || !(lo > 0.0) || !(lo < hi) || !(hi < fs / 2.0)) {
        throw ParamError("design_bandpass: need 0 < lo < hi < fs/2");
    }
    auto taps = static_cast<std::size_t>(std::ceil(fs));
    if (taps % 2 == 0) ++taps;
    if (taps < 3) taps = 3;

    const auto upper = lowpass(taps, hi, fs);
    const auto lower = lowpass(taps, lo, fs);
    FilterKernel k;
    k.fs = fs;
    k.lo = lo;
    k.hi = hi;
    k.taps.resize(taps);
    for (std::size_t i = 0; i < taps; ++i) k.taps[i] = upper[i] - lower[i];
    // Force exact symmetry.
    for (std::size_t i = 0; i < taps / 2; ++i) {
        const double avg = 0.5 * (k.taps[i] + k.taps[taps - 1 - i]);
        k.taps[i] = avg;
        k.taps[taps - 1 - i] = avg;
    }
    return k;
}

double frequency_response(const FilterKernel& kernel, double freq_hz) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < kernel.taps.size(); ++i) {
        const double angle = -2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / kernel.fs;
        acc += kernel.taps[i] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    return std::abs(acc);
}

EcgRecord apply_filter(const EcgRecord& record, const FilterKernel& kernel) {
    if (record.fs != kernel.fs) throw ParamError("apply_filter: sampling rate mismatch");
    validate(record);
    const std::size_t n = record.samples.size();
    const auto delay = static_cast<long long>(kernel.delay());

    EcgRecord out = record;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const long long base = static_cast<long long>(i) - delay;
        for (std::size_t k = 0; k < kernel.taps.size(); ++k) {
            acc += kernel.taps[k] * record.samples[reflect_index(base + static_cast<long long>(k), n)];
        }
        out.samples[i] = acc;
    }
    return out;
}

std::vector<double> integrated_energy(std::span<const double> samples, double fs, const DetectorParams& params) {
    const std::size_t n = samples.size();
    std::vector<double> energy(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        const double d = samples[i] - samples[i - 1];
        energy[i] = d * d;
    }
    const auto window = std::max<long long>(1, std::llround(params.integration_window * fs));
    const long long lead = window / 2;

    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + energy[i];

    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const long long a = std::max<long long>(0, static_cast<long long>(i) - lead);
        const long long b = std::min<long long>(static_cast<long long>(n), static_cast<long long>(i) - lead + window);
        out[i] = b > a ? (prefix[b] - prefix[a]) / static_cast<double>(window) : 0.0;
    }
    return out;
}

std::vector<std::size_t> detect_r_peaks(const EcgRecord& record, const DetectorParams& params) {
    validate(record);
    const auto& x = record.samples;
    const std::size_t n = x.size();
    const double fs = record.fs;
    const auto integ = integrated_energy(x, fs, params);

    const auto learn = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(params.learning_period * fs)));
    double running = 0.0;
    for (std::size_t i = 0; i < learn; ++i) running = std::max(running, integ[i]);

    const double decay = std::exp(-1.0 / (params.decay_time_constant * fs));
    const auto refractory = static_cast<std::size_t>(std::llround(params.refractory * fs));
    const auto margin = static_cast<std::size_t>(std::llround(params.integration_window * fs / 2.0));

    std::vector<std::size_t> peaks;
    std::size_t i = 0;
    while (i < n) {
        running = std::max(running * decay, integ[i]);
        if (!(integ[i] > params.threshold_factor * running)) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < n) {
            running = std::max(running * decay, integ[i]);
            if (!(integ[i] > params.threshold_factor * running)) break;
            ++i;
        }
        const std::size_t end = i;  // exclusive

        const std::size_t lo = start > margin ? start - margin : 0;
        const std::size_t hi = std::min(n, end + margin);
        std::size_t best = lo;
        for (std::size_t j = lo; j < hi; ++j) {
            if (x[j] > x[best]) best = j;
        }

        if (!peaks.empty() && best <= peaks.back()) continue;
        if (!peaks.empty() && best - peaks.back() < refractory) {
            if (x[best] > x[peaks.back()]) peaks.back() = best;
            continue;
        }
        peaks.push_back(best);
    }
    return peaks;
}

BeatSet segment_beats(const EcgRecord& record, std::span<const std::size_t> peaks) {
    validate(record);
    BeatSet set;
    set.peak_indices.assign(peaks.begin(), peaks.end());
    for (std::size_t i = 1; i < peaks.size(); ++i) {
        set.rr_intervals.push_back(static_cast<double>(peaks[i] - peaks[i - 1]) / record.fs);
    }

    const auto n = static_cast<long long>(record.samples.size());
    const long long pre = std::llround(kBeatPre * record.fs);
    const long long len = std::llround((kBeatPre + kBeatPost) * record.fs);
    const double step = static_cast<double>(len) / kBeatLength;

    for (std::size_t p : peaks) {
        const long long start = static_cast<long long>(p) - pre;
        if (start < 0 || start + len > n) continue;
        std::vector<double> beat(kBeatLength);
        for (int j = 0; j < kBeatLength; ++j) {
            const double pos = static_cast<double>(start) + j * step;
            const auto i0 = static_cast<long long>(std::floor(pos));
            const long long i1 = std::min(i0 + 1, n - 1);
            const double frac = pos - static_cast<double>(i0);
            beat[j] = record.samples[i0] * (1.0 - frac) + record.samples[i1] * frac;
        }
        double mean = 0.0;
        for (double v : beat) mean += v;
        mean /= kBeatLength;
        double peak_abs = 0.0;
        for (double& v : beat) {
            v -= mean;
            peak_abs = std::max(peak_abs, std::abs(v));
        }
        if (peak_abs < 1e-12) continue;
        for (double& v : beat) v /= peak_abs;
        set.beats.push_back(std::move(beat));
    }
    return set;
}

double population_std(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size()));
}

ScalarFeatures ecg_scalar_features(const EcgRecord& record, std::span<const std::size_t> peaks) {
    validate(record);
    ScalarFeatures out;
    if (peaks.size() < 2) return out;

    std::vector<double> rr;
    for (std::size_t i = 1; i < peaks.size(); ++i) {
        rr.push_back(static_cast<double>(peaks[i] - peaks[i - 1]) / record.fs);
    }
    double mean_rr = 0.0;
    for (double v : rr) mean_rr += v;
    mean_rr /= static_cast<double>(rr.size());
    if (mean_rr > 0.0) out["mean_hr"] = 60.0 / mean_rr;
    if (peaks.size() < 3) return out;

    out["hrv_sdnn"] = population_std(rr);

    const auto integ = integrated_energy(record.samples, record.fs);
    const auto n = static_cast<long long>(integ.size());
    const long long pre = std::llround(kBeatPre * record.fs);
    const long long post = std::llround(kBeatPost * record.fs);
    std::vector<double> widths;
    for (std::size_t p : peaks) {
        const long long lo = std::max<long long>(0, static_cast<long long>(p) - pre);
        const long long hi = std::min<long long>(n - 1, static_cast<long long>(p) + post);
        long long arg = lo;
        for (long long j = lo; j <= hi; ++j) {
            if (integ[j] > integ[arg]) arg = j;
        }
        const double half = 0.5 * integ[arg];
        if (!(integ[arg] > 0.0)) continue;
        long long left = arg;
        while (left > lo && integ[left - 1] >= half) --left;
        long long right = arg;
        while (right < hi && integ[right + 1] >= half) ++right;
        widths.push_back(static_cast<double>(right - left + 1) / record.fs);
    }
    if (widths.size() >= 3) {
        const double sd = population_std(widths);
        out["qrs_width_var"] = sd * sd;
    }
    return out;
}

}  // namespace cvfusion
