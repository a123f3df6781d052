// Acceptance run: one PASS/FAIL line per criterion.
//
// Library-level checks run in process; the end-to-end checks drive the
// cvfusion executable in a scratch directory. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include "cvfusion/ecg_prep.hpp"
#include "cvfusion/error.hpp"
#include "cvfusion/evalstat.hpp"
#include "cvfusion/model.hpp"
#include "cvfusion/pipeline.hpp"
#include "cvfusion/spectral.hpp"
#include "cvfusion/synthgen.hpp"
#include "cvfusion/transport.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"
#include "support/process.hpp"

using namespace cvfusion;
using testing_support::quote;
using testing_support::run_command;
using testing_support::TempDir;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

std::vector<Complex> random_complex(std::size_t n, std::mt19937_64& gen) {
    std::normal_distribution<double> dist;
    std::vector<Complex> x(n);
    for (auto& v : x) v = Complex(dist(gen), dist(gen));
    return x;
}

Spectrum random_spectrum(int n, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> w(static_cast<std::size_t>(n));
    std::vector<double> c(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        w[i] = dist(gen);
        c[i] = i;
    }
    return normalize(w, c);
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_text_file(e.path());
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome fft_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(1);
    double worst_dft = 0.0;
    double worst_parseval = 0.0;
    int pow2 = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 0;
        if (trial % 2 == 0) {
            n = std::size_t{1} << (1 + gen() % 10);  // 2 .. 1024
            ++pow2;
        } else {
            do {
                n = 2 + gen() % 1023;
            } while ((n & (n - 1)) == 0);
        }
        const auto x = random_complex(n, gen);
        const auto X = fft(x);
        worst_dft = std::max(worst_dft, oracle::max_rel_error(X, oracle::naive_dft(x)));
        double et = 0.0;
        double ef = 0.0;
        for (const auto& v : x) et += std::norm(v);
        for (const auto& v : X) ef += std::norm(v);
        worst_parseval = std::max(worst_parseval, std::abs(ef / static_cast<double>(n) - et) / et);
    }
    const double secs = seconds_since(t0);
    return {worst_dft < 1e-9 && worst_parseval < 1e-9 && secs < 10.0,
            "200 series (" + std::to_string(pow2) + " pow2), max rel err " + fmt(worst_dft) + ", Parseval " +
                fmt(worst_parseval) + ", " + fmt(secs) + " s"};
}

Outcome fft2_oracle() {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int w = 1 + static_cast<int>(gen() % 32);
        const int h = 1 + static_cast<int>(gen() % 32);
        std::vector<double> px(static_cast<std::size_t>(w) * h);
        for (auto& v : px) v = dist(gen);
        worst = std::max(worst, oracle::max_rel_error(fft2(w, h, px).data, oracle::naive_dft2(w, h, px)));
    }
    return {worst < 1e-9, "20 images up to 32x32, max rel err " + fmt(worst)};
}

Outcome emd_oracle() {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> pos(-10.0, 10.0);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + static_cast<int>(gen() % 7);
        PointSet p;
        PointSet q;
        for (int i = 0; i < n; ++i) {
            p.points.push_back(pos(gen));
            q.points.push_back(pos(gen));
        }
        const auto [dp, dq] = empirical_pair(p, q);
        worst = std::max(worst, std::abs(emd_1d(dp, dq) * n - emd_bruteforce(p, q)));
    }
    int violations = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto a = random_spectrum(32, gen);
        const auto b = random_spectrum(32, gen);
        const auto c = random_spectrum(32, gen);
        const double ab = emd_1d(a, b);
        if (ab < 0.0 || std::abs(ab - emd_1d(b, a)) > 1e-12) ++violations;
        if (emd_1d(a, a) != 0.0 || ab <= 1e-12) ++violations;
        if (emd_1d(a, c) > ab + emd_1d(b, c) + 1e-9) ++violations;
    }
    return {worst < 1e-9 && violations == 0,
            "500 point sets, max |n*emd_1d - brute| " + fmt(worst) + "; metric violations " + std::to_string(violations)};
}

Outcome gradient_check() {
    const auto spec = default_spec(kInputLength, 13);
    auto w = init_network(spec);
    std::mt19937_64 gen(4);
    std::normal_distribution<double> dist;
    for (auto& l : w.layers)
        for (double& b : l.bias) b = 0.05 * dist(gen);
    std::vector<Sample> batch;
    for (int i = 0; i < 2; ++i) {
        Sample s;
        s.x.resize(kInputLength);
        for (auto& v : s.x) v = dist(gen);
        s.label = i;
        batch.push_back(std::move(s));
    }
    const auto g = backward(w, spec, batch);
    const double h = 1e-5;
    double worst = 0.0;
    std::size_t count = 0;
    auto check = [&](std::vector<double>& params, const std::vector<double>& grads) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double orig = params[i];
            params[i] = orig + h;
            const double up = batch_loss(w, spec, batch);
            params[i] = orig - h;
            const double down = batch_loss(w, spec, batch);
            params[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(grads[i]), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(grads[i] - numeric) / denom);
            ++count;
        }
    };
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        check(w.layers[l].weights, g.grads.layers[l].weights);
        check(w.layers[l].bias, g.grads.layers[l].bias);
    }
    return {worst < 1e-4 && count == w.parameter_count(),
            std::to_string(count) + " parameters of the default network, max rel err " + fmt(worst)};
}

Outcome loss_softmax() {
    const double l = cross_entropy(std::vector<double>(4, 0.25), 0);
    const double loss_err = std::abs(l - std::log(4.0));
    std::mt19937_64 gen(5);
    std::normal_distribution<double> dist(0.0, 10.0);
    double worst = 0.0;
    bool in_range = true;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> z(4);
        for (auto& v : z) v = dist(gen);
        const auto p = softmax(z);
        double s = 0.0;
        for (double v : p) {
            s += v;
            in_range = in_range && v >= 0.0 && v <= 1.0;
        }
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return {loss_err <= 1e-12 && worst <= 1e-12 && in_range,
            "|loss - ln 4| " + fmt(loss_err) + ", max |sum - 1| " + fmt(worst)};
}

Outcome statistics_fixtures() {
    const auto r = anova_f({{1, 2, 3}, {2, 3, 4}, {3, 4, 5}, {4, 5, 6}});
    const bool anova_ok = std::abs(r.f_stat - 5.0) <= 1e-9 && r.p_value > 0.025 && r.p_value < 0.05;
    double worst = 0.0;
    for (double d1 : {1.0, 2.0, 3.0, 5.0, 10.0}) {
        for (double d2 : {1.0, 4.0, 8.0, 20.0, 100.0}) {
            for (double F : {0.1, 0.5, 1.0, 2.0, 5.0, 8.12}) {
                worst = std::max(worst, std::abs(f_sf(F, d1, d2) - (1.0 - oracle::f_cdf(F, d1, d2))));
            }
        }
    }
    const auto m = metrics_from_counts(8, 6, 4, 2);
    const bool metrics_ok = m.accuracy == 0.70 && m.sensitivity == 0.80 && m.specificity == 0.60;
    return {anova_ok && worst < 1e-8 && metrics_ok,
            "F " + fmt(r.f_stat) + " p " + fmt(r.p_value) + ", f_sf vs quadrature max err " + fmt(worst) +
                ", metrics " + (metrics_ok ? "0.70/0.80/0.60" : "mismatch")};
}

// ---------------------------------------------------------------------------
// End-to-end checks through the executable.

class Cli {
public:
    explicit Cli(const fs::path& dir) : dir_(dir) {}

    int operator()(const std::string& args) const {
        return run_command(std::string(CVFUSION_CLI_PATH) + " " + args + " >>" + quote((dir_ / "cli.log").string()) +
                           " 2>&1");
    }
    std::string path(const std::string& name) const { return quote((dir_ / name).string()); }

private:
    fs::path dir_;
};

double overall_accuracy(const fs::path& eval_json) {
    const auto doc = nlohmann::json::parse(read_text_file(eval_json));
    return doc.at("overall").at("accuracy").get<double>();
}

Outcome end_to_end(const Cli& cli, const fs::path& dir) {
    const auto t0 = Clock::now();
    if (cli("synth --out " + cli.path("d") + " --n 100 --seed 42") != 0) return {false, "synth failed"};
    if (cli("featurize --manifest " + cli.path("d/manifest.json") + " --mode fft-emd --out " + cli.path("f.csv")) != 0)
        return {false, "featurize failed"};
    if (cli("train --features " + cli.path("f.csv") + " --epochs 150 --seed 7 --out " + cli.path("m.json")) != 0)
        return {false, "train failed"};
    if (cli("eval --model " + cli.path("m.json") + " --features " + cli.path("f.csv") + " --split test --out " +
            cli.path("eval")) != 0)
        return {false, "eval failed"};
    const double secs = seconds_since(t0);
    const auto table = read_csv(dir / "eval.csv");
    int class_rows = 0;
    for (const auto& row : table.rows) class_rows += row[0] == "C1" || row[0] == "C2" || row[0] == "C3" || row[0] == "C4";
    const double acc = overall_accuracy(dir / "eval.json");
    const auto history = read_csv(dir / "m_history.csv");
    const double train_acc = std::stod(history.rows.back()[2]);
    return {acc >= 0.85 && secs < 300.0 && class_rows == 4,
            "held-out accuracy " + fmt(acc) + " (need >= 0.85), final train accuracy " + fmt(train_acc) + ", " +
                std::to_string(class_rows) + " class rows, " + fmt(secs) + " s"};
}

Outcome comparison(const Cli& cli, const fs::path& dir) {
    if (cli("compare --manifest " + cli.path("d/manifest.json") + " --methods fft-emd,wt,hog --seed 7 --out " +
            cli.path("compare.csv")) != 0)
        return {false, "compare failed"};
    const auto table = read_csv(dir / "compare.csv");
    const bool shape = table.columns == std::vector<std::string>{"method", "accuracy", "sensitivity", "specificity"} &&
                       table.rows.size() == 3;
    if (!shape) return {false, "unexpected table shape"};
    std::map<std::string, double> acc;
    for (const auto& row : table.rows) acc[row[0]] = std::stod(row[1]);
    const bool order = acc["fft-emd"] >= acc["wt"] && acc["fft-emd"] >= acc["hog"];
    return {order, "accuracy % fft-emd " + fmt(acc["fft-emd"]) + ", wt " + fmt(acc["wt"]) + ", hog " + fmt(acc["hog"])};
}

Outcome tortuosity_anova(const Cli& cli, const fs::path& dir) {
    if (cli("anova --features " + cli.path("f.csv") + " --columns tortuosity --out " + cli.path("anova.csv")) != 0)
        return {false, "anova failed"};
    const auto table = read_csv(dir / "anova.csv");
    if (table.rows.size() != 1) return {false, "unexpected table shape"};
    const auto p = parse_double(table.rows[0][2]);
    return {p && *p < 0.01, "tortuosity F " + table.rows[0][1] + ", p " + table.rows[0][2]};
}

Outcome determinism(const Cli& cli, const fs::path& dir) {
    std::vector<std::string> problems;
    // Datasets.
    if (cli("synth --out " + cli.path("d2") + " --n 100 --seed 42") != 0) return {false, "second synth failed"};
    if (tree_contents(dir / "d") != tree_contents(dir / "d2")) problems.push_back("dataset");
    // Features, models and reports.
    cli("featurize --manifest " + cli.path("d/manifest.json") + " --mode fft-emd --out " + cli.path("f2.csv"));
    cli("train --features " + cli.path("f2.csv") + " --epochs 150 --seed 7 --out " + cli.path("m2.json"));
    cli("eval --model " + cli.path("m2.json") + " --features " + cli.path("f2.csv") + " --split test --out " +
        cli.path("eval2"));
    auto same = [&](const std::string& a, const std::string& b) {
        try {
            return read_text_file(dir / a) == read_text_file(dir / b);
        } catch (const Error&) {
            return false;
        }
    };
    if (!same("f.csv", "f2.csv")) problems.push_back("features");
    if (!same("f.templates.json", "f2.templates.json")) problems.push_back("templates");
    // Models differ only in the templates path they point at.
    auto model_body = [&](const std::string& name) {
        auto j = nlohmann::json::parse(read_text_file(dir / name));
        j.erase("templates_path");
        return j.dump();
    };
    try {
        if (model_body("m.json") != model_body("m2.json")) problems.push_back("model");
    } catch (const std::exception&) {
        problems.push_back("model");
    }
    if (!same("m_history.csv", "m2_history.csv")) problems.push_back("history");
    if (!same("eval.csv", "eval2.csv")) problems.push_back("eval csv");
    // Model round trip.
    const auto model = load_model(dir / "m.json");
    save_model(model, dir / "m_copy.json");
    const auto back = load_model(dir / "m_copy.json");
    const auto table = read_feature_table(dir / "f.csv");
    double worst = 0.0;
    for (const auto& row : table.rows) {
        const auto a = model.predict(row.inputs);
        const auto b = back.predict(row.inputs);
        for (int k = 0; k < kNumClasses; ++k) worst = std::max(worst, std::abs(a.probs[k] - b.probs[k]));
    }
    if (worst >= 1e-12) problems.push_back("model round trip");
    // Format round trips on every generated record.
    const auto manifest = load_manifest(dir / "d" / "manifest.json");
    int bad_files = 0;
    for (const auto& r : manifest.records) {
        const auto ecg = parse_ecg_csv(r.ecg_path);
        const auto ecg_back = parse_ecg_csv_text(format_ecg_csv(ecg));
        for (std::size_t i = 0; i < ecg.samples.size(); ++i) {
            if (std::abs(ecg.samples[i] - ecg_back.samples[i]) > 1e-9) {
                ++bad_files;
                break;
            }
        }
        const auto img = parse_pgm(r.fundus_od_path);
        if (parse_pgm_bytes(format_pgm(img, 255, PgmEncoding::ascii)).pixels != img.pixels) ++bad_files;
        if (parse_pgm_bytes(format_pgm(img, 255, PgmEncoding::binary)).pixels != img.pixels) ++bad_files;
    }
    if (bad_files) problems.push_back(std::to_string(bad_files) + " format round trips");
    if (load_manifest(dir / "d" / "manifest.json").records.size() != manifest.records.size()) problems.push_back("manifest");

    std::string detail = "datasets, features, model, history, eval report byte-identical; max |dprob| " + fmt(worst) +
                         "; " + std::to_string(manifest.records.size()) + " records round-tripped";
    if (!problems.empty()) {
        detail = "mismatch:";
        for (const auto& p : problems) detail += " " + p;
    }
    return {problems.empty(), detail};
}

Outcome preprocessing() {
    const auto k = design_bandpass(500.0, kBandLow, kBandHigh);
    EcgRecord dc;
    dc.fs = 500.0;
    dc.samples.assign(5000, 5.0);
    const auto out = apply_filter(dc, k);
    double residual = 0.0;
    for (std::size_t i = 500; i + 500 < out.samples.size(); ++i) residual = std::max(residual, std::abs(out.samples[i]));
    EcgRecord tone;
    tone.fs = 500.0;
    for (int i = 0; i < 5000; ++i) tone.samples.push_back(std::sin(2.0 * std::numbers::pi * 60.0 * i / 500.0));
    const auto hum = apply_filter(tone, k);
    double hum_amp = 0.0;
    for (std::size_t i = 500; i + 500 < hum.samples.size(); ++i) hum_amp = std::max(hum_amp, std::abs(hum.samples[i]));
    const double attenuation = 1.0 / hum_amp;

    SynthParams params;
    std::size_t total = 0;
    std::size_t found = 0;
    for (int i = 0; i < 100; ++i) {
        const auto rec = gen_ecg(Binary::normal, params, record_seed(2024, "normal_" + std::to_string(i)));
        const auto peaks = detect_r_peaks(apply_filter(rec.record, k));
        total += rec.true_peaks_s.size();
        for (double t : rec.true_peaks_s) {
            for (std::size_t p : peaks) {
                if (std::abs(static_cast<double>(p) / params.fs - t) <= 0.020) {
                    ++found;
                    break;
                }
            }
        }
    }
    const double recall = static_cast<double>(found) / static_cast<double>(total);
    return {residual < 0.05 && attenuation >= 10.0 && recall >= 0.99,
            "DC residual " + fmt(residual) + " mV, 60 Hz attenuation " + fmt(attenuation) + "x, peak recall " +
                fmt(recall) + " (" + std::to_string(found) + "/" + std::to_string(total) + ")"};
}

}  // namespace

int main() {
    TempDir scratch("acceptance");
    const Cli cli(scratch.path());
    const fs::path dir = scratch.path();

    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "FFT oracle", fft_oracle},
        {2, "2D DFT oracle", fft2_oracle},
        {3, "EMD oracle", emd_oracle},
        {4, "gradient check", gradient_check},
        {5, "loss and softmax", loss_softmax},
        {6, "statistics fixtures", statistics_fixtures},
        {7, "end-to-end synthetic run", [&] { return end_to_end(cli, dir); }},
        {8, "comparative ordering", [&] { return comparison(cli, dir); }},
        {9, "tortuosity ANOVA", [&] { return tortuosity_anova(cli, dir); }},
        {10, "determinism and round trips", [&] { return determinism(cli, dir); }},
        {11, "preprocessing fixtures", preprocessing},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed;
}
