#include "cvfusion/synthgen.hpp"

#include "cvfusion/error.hpp"
#include "cvfusion/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace cvfusion {

void validate(const SynthParams& p) {
    if (p.n_per_class < 1) throw ParamError("synth: n_per_class must be >= 1");
    if (!(p.fs > 0.0) || !(p.duration >= 2.0)) throw ParamError("synth: need fs > 0 and duration >= 2 s");
    if (p.image_size < kMinImageSide) throw ParamError("synth: image_size must be >= 16");
    if (!(p.tortuosity_normal_lo < p.tortuosity_normal_hi) || !(p.tortuosity_abnormal_lo < p.tortuosity_abnormal_hi)) {
        throw ParamError("synth: empty tortuosity range");
    }
}

std::string_view to_string(EcgAnomaly a) {
    switch (a) {
        case EcgAnomaly::none: return "none";
        case EcgAnomaly::wide_qrs: return "wide_qrs";
        case EcgAnomaly::st_elevation: return "st_elevation";
        case EcgAnomaly::irregular_rr: return "irregular_rr";
    }
    return "none";
}

std::uint64_t record_seed(std::uint64_t dataset_seed, std::string_view id) {
    return derive_key(dataset_seed, hash_id(id));
}

// ---------------------------------------------------------------------------
// ECG

namespace {

struct Wave {
    double offset;  // s relative to R
    double amplitude;  // mV
    double width;  // Gaussian sigma, s
};

constexpr std::array<Wave, 5> kBeat{{
    {-0.200, 0.15, 0.025},  // P
    {-0.035, -0.15, 0.010},  // Q
    {0.000, 1.20, 0.012},  // R
    {0.035, -0.25, 0.010},  // S
    {0.280, 0.30, 0.045},  // T
}};

constexpr double kNormalJitter = 0.010;
constexpr double kIrregularJitter = 0.080;
constexpr double kWideFactor = 1.6;
constexpr double kStOffset = 0.15;
constexpr double kStStart = 0.06;
constexpr double kStEnd = 0.26;
constexpr double kNoiseSd = 0.02;

double smoothstep(double e0, double e1, double x) {
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

}  // namespace

SynthEcg gen_ecg(Binary label, const SynthParams& params, std::uint64_t seed, std::optional<EcgAnomaly> force) {
    validate(params);
    CounterRng rng(derive_key(seed, 0xEC6));
    SynthEcg out;
    if (label == Binary::abnormal) {
        const auto pick = rng.below(3);
        out.anomaly = force && *force != EcgAnomaly::none ? *force : static_cast<EcgAnomaly>(1 + pick);
    }

    const double hr = rng.uniform(55.0, 95.0);
    const double rr_mean = 60.0 / hr;
    const double jitter = out.anomaly == EcgAnomaly::irregular_rr ? kIrregularJitter : kNormalJitter;
    auto next_rr = [&] { return std::max(0.3, rng.normal(rr_mean, jitter)); };

    std::vector<double> peaks;  // includes beats just outside the record so edges look natural
    double t = -rng.uniform(0.0, rr_mean);
    while (t < params.duration + 1.0) {
        peaks.push_back(t);
        t += next_rr();
    }

    const auto n = static_cast<std::size_t>(std::llround(params.fs * params.duration));
    out.record.fs = params.fs;
    out.record.label = label;
    out.record.samples.assign(n, 0.0);
    const double r_scale = out.anomaly == EcgAnomaly::wide_qrs ? kWideFactor : 1.0;
    for (double peak : peaks) {
        const auto lo = static_cast<long long>(std::floor((peak - 0.5) * params.fs));
        const auto hi = static_cast<long long>(std::ceil((peak + 0.6) * params.fs));
        for (long long i = std::max(0LL, lo); i < std::min(static_cast<long long>(n), hi); ++i) {
            const double dt = static_cast<double>(i) / params.fs - peak;
            double v = 0.0;
            for (std::size_t w = 0; w < kBeat.size(); ++w) {
                const double sigma = w == 2 ? kBeat[w].width * r_scale : kBeat[w].width;
                const double z = (dt - kBeat[w].offset) / sigma;
                v += kBeat[w].amplitude * std::exp(-0.5 * z * z);
            }
            if (out.anomaly == EcgAnomaly::st_elevation) {
                v += kStOffset * smoothstep(kStStart - 0.02, kStStart + 0.02, dt) *
                     (1.0 - smoothstep(kStEnd - 0.02, kStEnd + 0.02, dt));
            }
            out.record.samples[i] += v;
        }
        if (peak >= 0.0 && peak < params.duration) out.true_peaks_s.push_back(peak);
    }

    CounterRng noise = rng.split(0x4015E);
    for (double& v : out.record.samples) v += noise.normal(0.0, kNoiseSd);
    return out;
}

// ---------------------------------------------------------------------------
// Fundus

namespace {

constexpr double kBackground = 0.08;
constexpr double kVesselLevel = 0.70;
constexpr double kDiscLevel = 0.90;
constexpr double kStep = 2.0;       // px per random-walk step
constexpr double kTurnScale = 0.06;  // turn-rate sd per unit tortuosity, rad/step
constexpr int kMaxDepth = 4;

struct Canvas {
    int size;
    std::vector<double> px;

    // Anti-aliased capsule from (x0, y0) to (x1, y1) with the given radius,
    // composited by maximum.
    void capsule(double x0, double y0, double x1, double y1, double radius, double level) {
        const int xmin = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - radius - 1.0)));
        const int xmax = std::min(size - 1, static_cast<int>(std::ceil(std::max(x0, x1) + radius + 1.0)));
        const int ymin = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - radius - 1.0)));
        const int ymax = std::min(size - 1, static_cast<int>(std::ceil(std::max(y0, y1) + radius + 1.0)));
        const double dx = x1 - x0;
        const double dy = y1 - y0;
        const double len2 = dx * dx + dy * dy;
        for (int y = ymin; y <= ymax; ++y) {
            for (int x = xmin; x <= xmax; ++x) {
                const double px_x = x + 0.5;
                const double px_y = y + 0.5;
                double t = len2 > 0.0 ? ((px_x - x0) * dx + (px_y - y0) * dy) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double ex = px_x - (x0 + t * dx);
                const double ey = px_y - (y0 + t * dy);
                const double d = std::sqrt(ex * ex + ey * ey);
                const double cover = std::clamp(radius + 0.5 - d, 0.0, 1.0);
                if (cover <= 0.0) continue;
                double& p = px[static_cast<std::size_t>(y) * size + x];
                p = std::max(p, kBackground + (level - kBackground) * cover);
            }
        }
    }

    void blob(double cx, double cy, double radius, double level) {
        const int r = static_cast<int>(std::ceil(3.0 * radius));
        for (int y = std::max(0, static_cast<int>(cy) - r); y <= std::min(size - 1, static_cast<int>(cy) + r); ++y) {
            for (int x = std::max(0, static_cast<int>(cx) - r); x <= std::min(size - 1, static_cast<int>(cx) + r);
                 ++x) {
                const double ex = x + 0.5 - cx;
                const double ey = y + 0.5 - cy;
                const double g = std::exp(-0.5 * (ex * ex + ey * ey) / (radius * radius));
                double& p = px[static_cast<std::size_t>(y) * size + x];
                p = std::max(p, kBackground + (level - kBackground) * g);
            }
        }
    }
};

struct VesselStyle {
    double turn_sd;
    bool beading;
    double bead_period;  // px along the path
    double bead_depth;
};

void grow_vessel(Canvas& canvas, CounterRng& rng, double x, double y, double heading, double radius, double length,
                 int depth, const VesselStyle& style) {
    const int steps = std::max(2, static_cast<int>(length / kStep));
    double turn = 0.0;
    double travelled = 0.0;
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int s = 0; s < steps; ++s) {
        turn = 0.7 * turn + rng.normal(0.0, style.turn_sd);
        heading += turn;
        const double nx = x + kStep * std::cos(heading);
        const double ny = y + kStep * std::sin(heading);
        double r = radius;
        if (style.beading) {
            r *= 1.0 + style.bead_depth * std::sin(2.0 * std::numbers::pi * travelled / style.bead_period + phase);
        }
        canvas.capsule(x, y, nx, ny, r, kVesselLevel);
        x = nx;
        y = ny;
        travelled += kStep;
        if (x < -8.0 || y < -8.0 || x > canvas.size + 8.0 || y > canvas.size + 8.0) return;
    }
    if (depth >= kMaxDepth || radius < 0.6) return;
    const double spread = rng.uniform(0.35, 0.65);
    grow_vessel(canvas, rng, x, y, heading + spread, radius * 0.72, length * 0.75, depth + 1, style);
    grow_vessel(canvas, rng, x, y, heading - spread, radius * 0.72, length * 0.75, depth + 1, style);
}

}  // namespace

SynthFundus gen_fundus(Binary label, const SynthParams& params, std::uint64_t seed) {
    validate(params);
    CounterRng rng(derive_key(seed, 0xF0D));
    SynthFundus out;
    const bool abnormal = label == Binary::abnormal;
    out.tortuosity = abnormal ? rng.uniform(params.tortuosity_abnormal_lo, params.tortuosity_abnormal_hi)
                              : rng.uniform(params.tortuosity_normal_lo, params.tortuosity_normal_hi);

    const int n = params.image_size;
    const double scale = n / 256.0;
    Canvas canvas{n, std::vector<double>(static_cast<std::size_t>(n) * n, kBackground)};

    const double disc_x = n * rng.uniform(0.35, 0.65);
    const double disc_y = n * rng.uniform(0.35, 0.65);
    canvas.blob(disc_x, disc_y, 7.0 * scale, kDiscLevel);

    const VesselStyle style{kTurnScale * out.tortuosity, abnormal, 12.0 * scale, 0.35};
    const int roots = 4;
    const double base = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int k = 0; k < roots; ++k) {
        CounterRng branch = rng.split(static_cast<std::uint64_t>(k) + 1);
        const double heading = base + k * 2.0 * std::numbers::pi / roots + branch.normal(0.0, 0.2);
        grow_vessel(canvas, branch, disc_x, disc_y, heading, 2.2 * scale, 60.0 * scale, 0, style);
    }

    if (abnormal) {
        CounterRng blobs = rng.split(0xB10B);
        const int count = 3 + static_cast<int>(blobs.below(6));
        for (int b = 0; b < count; ++b) {
            const double bx = blobs.uniform(0.1, 0.9) * n;
            const double by = blobs.uniform(0.1, 0.9) * n;
            canvas.blob(bx, by, blobs.uniform(1.5, 3.0) * scale, 0.95);
        }
    }

    CounterRng noise = rng.split(0x4015E);
    for (double& p : canvas.px) p = std::clamp(p + noise.normal(0.0, 0.01), 0.0, 1.0);

    out.image.width = n;
    out.image.height = n;
    out.image.pixels = std::move(canvas.px);
    return out;
}

// ---------------------------------------------------------------------------
// Dataset

DatasetManifest gen_dataset(const SynthParams& params, const fs::path& out_dir) {
    validate(params);
    std::error_code ec;
    for (const char* sub : {"ecg", "fundus", "truth"}) {
        fs::create_directories(out_dir / sub, ec);
        if (ec) throw IoError("synth: cannot create " + (out_dir / sub).string() + ": " + ec.message());
    }

    DatasetManifest manifest;
    manifest.base_dir = out_dir;
    manifest.seed = static_cast<std::int64_t>(params.seed);

    for (int c = 0; c < kNumClasses; ++c) {
        const ClassLabel label = ClassLabel::from_index(c);

        // Per-class split: floor(n / 4) test records chosen by a seeded shuffle.
        std::vector<int> order(static_cast<std::size_t>(params.n_per_class));
        for (int i = 0; i < params.n_per_class; ++i) order[i] = i;
        CounterRng split_rng(derive_key(params.seed, 0x5917 + static_cast<std::uint64_t>(c)));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[split_rng.below(i)]);
        std::vector<bool> is_test(order.size(), false);
        for (int k = 0; k < params.n_per_class / 4; ++k) is_test[order[k]] = true;

        for (int i = 0; i < params.n_per_class; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s_%04d", std::string(to_string(label.joint)).c_str(), i);
            const std::string id = buf;
            const std::uint64_t rs = record_seed(params.seed, id);

            SynthEcg ecg = gen_ecg(label.ecg, params, rs);
            ecg.record.id = id;
            SynthFundus fundus = gen_fundus(label.fundus, params, rs);
            fundus.image.id = id;

            ManifestEntry e;
            e.id = id;
            e.ecg_path = out_dir / "ecg" / (id + ".csv");
            e.fundus_od_path = out_dir / "fundus" / (id + "_od.pgm");
            e.truth_path = out_dir / "truth" / (id + ".json");
            e.ecg_label = label.ecg;
            e.fundus_od_label = label.fundus;
            e.fundus_label = label.fundus;
            e.split = is_test[i] ? Split::test : Split::train;

            write_ecg_csv(ecg.record, e.ecg_path);
            write_pgm(fundus.image, e.fundus_od_path);
            const nlohmann::json truth{{"anomaly_kind", std::string(to_string(ecg.anomaly))},
                                       {"tortuosity", fundus.tortuosity},
                                       {"true_peaks_s", ecg.true_peaks_s}};
            write_text_file(*e.truth_path, render_json(truth));
            manifest.records.push_back(std::move(e));
        }
    }
    write_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

}  // namespace cvfusion
