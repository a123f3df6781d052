#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvfusion/dataio.hpp"

namespace cvfusion {

struct SynthParams {
    int n_per_class = 100;
    std::uint64_t seed = 0;
    double fs = 500.0;
    double duration = 10.0;  // seconds
    int image_size = 256;
    double tortuosity_normal_lo = 1.0;
    double tortuosity_normal_hi = 2.0;
    double tortuosity_abnormal_lo = 2.0;
    double tortuosity_abnormal_hi = 3.5;
};

// Throws ParamError on non-positive counts/sizes or empty tortuosity ranges.
void validate(const SynthParams& params);

enum class EcgAnomaly { none, wide_qrs, st_elevation, irregular_rr };

std::string_view to_string(EcgAnomaly a);

struct SynthEcg {
    EcgRecord record;
    std::vector<double> true_peaks_s;  // R-peak times inside the record
    EcgAnomaly anomaly = EcgAnomaly::none;
};

/// Sum-of-Gaussians beats (P, Q, R, S, T) at a heart rate drawn from
/// [55, 95] bpm with 10 ms RR jitter, plus white noise (0.02 mV).
/// Abnormal records get one anomaly: R width x1.6, +0.15 mV ST offset, or
/// 80 ms RR jitter. `force` overrides the drawn anomaly for abnormal labels.
SynthEcg gen_ecg(Binary label, const SynthParams& params, std::uint64_t record_seed,
                 std::optional<EcgAnomaly> force = std::nullopt);

struct SynthFundus {
    GrayImage image;
    double tortuosity = 0.0;
};

/// Dark background with a bright branching vessel tree grown from an optic
/// disc by a random walk whose turn-rate spread scales with the sampled
/// tortuosity. Abnormal images add 3-8 bright blobs and sinusoidal vessel
/// width beading.
SynthFundus gen_fundus(Binary label, const SynthParams& params, std::uint64_t record_seed);

// Per-record seed derived from the dataset seed and the record id.
std::uint64_t record_seed(std::uint64_t dataset_seed, std::string_view id);

/// Writes n_per_class records per joint class under out_dir:
///   ecg/<id>.csv, fundus/<id>_od.pgm, truth/<id>.json, manifest.json
/// Each class is split independently with floor(n / 4) test records, so
/// every class keeps at least one training record. Throws IoError.
DatasetManifest gen_dataset(const SynthParams& params, const fs::path& out_dir);

}  // namespace cvfusion
