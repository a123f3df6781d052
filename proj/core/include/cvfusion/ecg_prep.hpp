#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvfusion/dataio.hpp"

namespace cvfusion {

// Symmetric (linear-phase) FIR bandpass kernel.
struct FilterKernel {
    std::vector<double> taps;
    double fs = 0.0;
    double lo = 0.0;
    double hi = 0.0;

    std::size_t delay() const { return (taps.size() - 1) / 2; }
};

inline constexpr int kBeatLength = 256;
inline constexpr double kBeatPre = 0.3;   // seconds before the R peak
inline constexpr double kBeatPost = 0.5;  // seconds after the R peak

struct BeatSet {
    // Each window is kBeatLength samples, zero mean, max |x| == 1.
    std::vector<std::vector<double>> beats;
    std::vector<std::size_t> peak_indices;
    std::vector<double> rr_intervals;  // seconds, size = peaks - 1

    bool empty() const { return beats.empty(); }
};

/// Hamming-windowed sinc bandpass built as the difference of two unit-DC
/// lowpass kernels, so the DC response is zero up to rounding. The tap
/// count is the smallest odd integer >= fs (about one second of support).
/// Throws ParamError unless 0 < lo < hi < fs/2.
FilterKernel design_bandpass(double fs, double lo, double hi);

// Complex frequency response magnitude |H(f)| of a kernel.
double frequency_response(const FilterKernel& kernel, double freq_hz);

/// Zero-phase filtering: reflection-padded linear convolution with the
/// group delay removed, so output[n] lines up with input[n].
/// Throws ParamError if record.fs != kernel.fs.
EcgRecord apply_filter(const EcgRecord& record, const FilterKernel& kernel);

// Pan-Tompkins style detector constants.
struct DetectorParams {
    double integration_window = 0.150;  // s
    double refractory = 0.200;          // s
    double threshold_factor = 0.5;
    double decay_time_constant = 2.0;  // s
    double learning_period = 2.0;      // s used to seed the running peak
};

/// Integrated energy signal of the detector chain: first difference,
/// squaring, then a centered moving average over the integration window.
std::vector<double> integrated_energy(std::span<const double> samples, double fs,
                                      const DetectorParams& params = {});

/// R-peak detection on a bandpassed record. Returns strictly increasing
/// sample indices; empty when there is no activity.
std::vector<std::size_t> detect_r_peaks(const EcgRecord& record, const DetectorParams& params = {});

/// Cuts [peak - 0.3 s, peak + 0.5 s) around every peak, drops windows that
/// leave the record or are flat, resamples to kBeatLength samples and
/// normalizes to zero mean and unit max-abs.
BeatSet segment_beats(const EcgRecord& record, std::span<const std::size_t> peaks);

// Missing values are absent from the map, never zero-filled.
using ScalarFeatures = std::map<std::string, double>;

/// Timing features:
///   hrv_sdnn       population std of RR intervals (s), needs >= 3 peaks
///   qrs_width_var  population variance of per-beat widths (s^2), where a
///                  width is the time the integrated energy stays above 50%
///                  of its per-beat maximum; needs >= 3 peaks
///   mean_hr        60 / mean RR (bpm), needs >= 2 peaks
ScalarFeatures ecg_scalar_features(const EcgRecord& record, std::span<const std::size_t> peaks);

// Population standard deviation; 0 for fewer than one value.
double population_std(std::span<const double> values);

}  // namespace cvfusion
