// cvfusion command-line tool.
//
// Exit codes: 0 ok, 2 usage, 3 io, 4 data, 5 degenerate statistics.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cvfusion/error.hpp"
#include "cvfusion/pipeline.hpp"
#include "cvfusion/synthgen.hpp"

namespace {

using namespace cvfusion;

constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kOk = 0, kUsage = 2, kIo = 3, kData = 4, kDegenerate = 5 };

// Replaces the extension: "out/features.csv" + ".meta.json" -> "out/features.meta.json".
fs::path with_suffix(const fs::path& path, const std::string& suffix) {
    fs::path p = path;
    p.replace_extension();
    return fs::path(p.string() + suffix);
}

nlohmann::json provenance(const std::string& command, nlohmann::json options) {
    return {{"tool", "cvfusion"}, {"version", kToolVersion}, {"command", command}, {"config", std::move(options)}};
}

void write_meta(const fs::path& csv_path, const nlohmann::json& meta) {
    emit_report(meta, with_suffix(csv_path, ".meta.json"));
}

void ensure_parent(const fs::path& path) {
    if (!path.has_parent_path()) return;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// ---------------------------------------------------------------------------

struct SynthOpts {
    std::string out;
    int n = 100;
    std::uint64_t seed = 0;
};

int run_synth(const SynthOpts& o) {
    SynthParams p;
    p.n_per_class = o.n;
    p.seed = o.seed;
    const auto manifest = gen_dataset(p, o.out);
    std::cout << "wrote " << manifest.records.size() << " records to " << o.out << "\n";
    return kOk;
}

struct FeaturizeOpts {
    std::string manifest;
    std::string mode = "fft-emd";
    std::string out;
    std::string emd_refs = "both";
    bool emit_plots = false;
    std::string plots_dir;
};

int run_featurize(const FeaturizeOpts& o) {
    const Pipeline mode = parse_pipeline(o.mode);
    const EmdRefs refs = parse_emd_refs(o.emd_refs);
    const auto manifest = load_manifest(o.manifest);
    const auto result = featurize(manifest, mode, refs, o.emit_plots);

    const fs::path out = o.out;
    ensure_parent(out);
    emit_report(feature_table_to_table(result.table), out, ReportFormat::csv);
    nlohmann::json options{{"manifest", o.manifest}, {"mode", o.mode}, {"emd_refs", o.emd_refs}, {"out", o.out},
                           {"emit_plots", o.emit_plots}};
    if (manifest.seed) options["dataset_seed"] = *manifest.seed;
    if (result.templates) {
        const fs::path tpl = with_suffix(out, ".templates.json");
        write_text_file(tpl, templates_to_json(*result.templates).dump(1) + "\n");
        options["templates"] = tpl.string();
    }
    if (o.emit_plots) {
        const fs::path dir = o.plots_dir.empty() ? out.parent_path() / "plots" : fs::path(o.plots_dir);
        for (const auto& r : result.records) write_plot_files(r, dir);
        options["plots_dir"] = dir.string();
    }
    write_meta(out, provenance("featurize", options));
    std::cout << "wrote " << result.table.rows.size() << " rows x " << result.table.input_columns.size()
              << " inputs to " << o.out << "\n";
    return kOk;
}

struct TrainOpts {
    std::string features;
    std::string spec = "default";
    int epochs = 150;
    std::uint64_t seed = 0;
    std::string out;
    std::string history;
    double lr = 0.001;
    int batch_size = 16;
};

int run_train(const TrainOpts& o) {
    const auto table = read_feature_table(o.features);
    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.seed = o.seed;
    cfg.lr = o.lr;
    cfg.batch_size = o.batch_size;
    auto outcome = train_classifier(table, o.spec, cfg);
    const fs::path tpl = with_suffix(o.features, ".templates.json");
    if (fs::exists(tpl)) outcome.model.templates_path = tpl.string();

    const fs::path out = o.out;
    ensure_parent(out);
    save_model(outcome.model, out);
    const fs::path history = o.history.empty() ? with_suffix(out, "_history.csv") : fs::path(o.history);
    ensure_parent(history);
    emit_report(history_table(outcome.history), history, ReportFormat::csv);
    write_meta(history, provenance("train", {{"features", o.features},
                                             {"spec", o.spec},
                                             {"epochs", o.epochs},
                                             {"seed", o.seed},
                                             {"lr", o.lr},
                                             {"batch_size", o.batch_size},
                                             {"beta1", cfg.beta1},
                                             {"beta2", cfg.beta2},
                                             {"eps", cfg.eps},
                                             {"out", o.out},
                                             {"history", history.string()}}));
    const double acc = outcome.history.empty() ? 0.0 : outcome.history.back().train_acc;
    std::cout << "trained " << o.spec << " for " << o.epochs << " epochs; final train accuracy "
              << format_number(acc) << "\n";
    return kOk;
}

struct EvalOpts {
    std::string model;
    std::string features;
    std::string split = "test";
    std::string out;
};

int run_eval(const EvalOpts& o) {
    const auto model = load_model(o.model);
    const auto table = read_feature_table(o.features);
    std::optional<Split> split;
    if (o.split != "all") split = parse_split(o.split);
    const auto outcome = evaluate(model, table, split);

    const fs::path json_path = with_suffix(o.out, ".json");
    const fs::path csv_path = with_suffix(o.out, ".csv");
    ensure_parent(json_path);
    const nlohmann::json options{{"model", o.model},
                                 {"features", o.features},
                                 {"split", o.split},
                                 {"out", o.out},
                                 {"train_seed", model.train_seed},
                                 {"classifier", model.classifier}};
    nlohmann::json report = metrics_json(outcome);
    report["provenance"] = provenance("eval", options);
    emit_report(report, json_path);
    emit_report(metrics_table(outcome), csv_path, ReportFormat::csv);
    write_meta(csv_path, provenance("eval", options));
    std::cout << "evaluated " << outcome.n << " rows; overall accuracy " << percent(outcome.overall.accuracy)
              << "%\n";
    return kOk;
}

struct CompareOpts {
    std::string manifest;
    std::string methods = "fft-emd,wt,hog";
    std::uint64_t seed = 0;
    int epochs = 150;
    std::string out;
};

int run_compare(const CompareOpts& o) {
    const auto manifest = load_manifest(o.manifest);
    TrainConfig cfg;
    cfg.seed = o.seed;
    cfg.epochs = o.epochs;

    Table table{{"method", "accuracy", "sensitivity", "specificity"}, {}};
    nlohmann::json details = nlohmann::json::object();
    for (const auto& method : split_list(o.methods)) {
        const Pipeline mode = parse_pipeline(method);
        const auto features = featurize(manifest, mode);
        const auto trained = train_classifier(features.table, "default", cfg);
        const auto outcome = evaluate(trained.model, features.table, Split::test);
        table.rows.push_back({method, percent(outcome.overall.accuracy), percent(outcome.overall.sensitivity),
                              percent(outcome.overall.specificity)});
        details[method] = metrics_json(outcome);
        std::cout << method << ": accuracy " << percent(outcome.overall.accuracy) << "%\n";
    }
    const fs::path out = o.out;
    ensure_parent(out);
    emit_report(table, out, ReportFormat::csv);
    auto meta = provenance("compare", {{"manifest", o.manifest},
                                       {"methods", o.methods},
                                       {"seed", o.seed},
                                       {"epochs", o.epochs},
                                       {"classifier", "default"},
                                       {"split", "test"},
                                       {"out", o.out}});
    meta["results"] = details;
    write_meta(out, meta);
    return kOk;
}

struct AnovaOpts {
    std::string features;
    std::string columns;
    std::string out;
    std::string quartiles;
};

int run_anova_cmd(const AnovaOpts& o) {
    const auto table = read_feature_table(o.features);
    const auto columns = split_list(o.columns);
    if (columns.empty()) throw ParamError("--columns must name at least one column");
    const auto rows = run_anova(table, columns);

    const fs::path out = o.out;
    ensure_parent(out);
    emit_report(anova_table(rows), out, ReportFormat::csv);
    const fs::path qpath = o.quartiles.empty() ? with_suffix(out, "_quartiles.csv") : fs::path(o.quartiles);
    ensure_parent(qpath);
    emit_report(quartile_table(rows), qpath, ReportFormat::csv);
    const auto meta = provenance("anova", {{"features", o.features},
                                           {"columns", o.columns},
                                           {"out", o.out},
                                           {"quartiles", qpath.string()},
                                           {"alpha", kSignificanceLevel}});
    write_meta(out, meta);
    write_meta(qpath, meta);

    int code = kOk;
    for (const auto& r : rows) {
        if (r.degenerate) {
            std::cerr << "cvfusion: degenerate: " << r.error << "\n";
            code = kDegenerate;
        } else if (!r.result) {
            std::cerr << "cvfusion: error: " << r.feature << ": " << r.error << "\n";
            if (code == kOk) code = kData;
        }
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal ECG + fundus classification pipeline"};
    app.set_config("--config", "", "TOML config file; command-line flags take precedence");
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    SynthOpts synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic labeled dataset");
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--n", synth.n, "Records per class")->check(CLI::Range(1, 1000000))->capture_default_str();
    s->add_option("--seed", synth.seed, "Dataset seed")->capture_default_str();

    FeaturizeOpts feat;
    auto* f = app.add_subcommand("featurize", "Extract a feature table from a manifest");
    f->add_option("--manifest", feat.manifest, "Dataset manifest JSON")->required();
    f->add_option("--mode", feat.mode, "Feature pipeline")
        ->check(CLI::IsMember({"fft-emd", "wt", "hog"}))
        ->capture_default_str();
    f->add_option("--out", feat.out, "Feature table CSV")->required();
    f->add_option("--emd-refs", feat.emd_refs, "EMD references")
        ->check(CLI::IsMember({"both", "normal-only"}))
        ->capture_default_str();
    f->add_flag("--emit-plots", feat.emit_plots, "Write per-record waveform and spectrum CSVs");
    f->add_option("--plots-dir", feat.plots_dir, "Directory for plot CSVs (default: <out dir>/plots)");

    TrainOpts tr;
    auto* t = app.add_subcommand("train", "Train a classifier on the train split of a feature table");
    t->add_option("--features", tr.features, "Feature table CSV")->required();
    t->add_option("--spec,--classifier", tr.spec, "Network")->check(CLI::IsMember({"default", "emd-mlp"}))->capture_default_str();
    t->add_option("--epochs", tr.epochs, "Training epochs")->check(CLI::Range(0, 100000))->capture_default_str();
    t->add_option("--seed", tr.seed, "Initialization and shuffling seed")->capture_default_str();
    t->add_option("--out", tr.out, "Model JSON")->required();
    t->add_option("--history", tr.history, "History CSV (default: <out>_history.csv)");
    t->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    t->add_option("--batch-size", tr.batch_size, "Mini-batch size")->check(CLI::Range(1, 1 << 20))->capture_default_str();

    EvalOpts ev;
    auto* e = app.add_subcommand("eval", "Evaluate a model; writes <out>.json and <out>.csv");
    e->add_option("--model", ev.model, "Model JSON")->required();
    e->add_option("--features", ev.features, "Feature table CSV")->required();
    e->add_option("--split", ev.split, "Rows to evaluate")
        ->check(CLI::IsMember({"test", "train", "unassigned", "all"}))
        ->capture_default_str();
    e->add_option("--out", ev.out, "Report path stem")->required();

    CompareOpts cmp;
    auto* c = app.add_subcommand("compare", "Compare feature pipelines under one split and classifier");
    c->add_option("--manifest", cmp.manifest, "Dataset manifest JSON")->required();
    c->add_option("--methods", cmp.methods, "Comma-separated pipelines")->capture_default_str();
    c->add_option("--seed", cmp.seed, "Training seed")->capture_default_str();
    c->add_option("--epochs", cmp.epochs, "Training epochs")->check(CLI::Range(0, 100000))->capture_default_str();
    c->add_option("--out", cmp.out, "Comparison CSV")->required();

    AnovaOpts an;
    auto* a = app.add_subcommand("anova", "One-way ANOVA across the four classes");
    a->add_option("--features", an.features, "Feature table CSV")->required();
    a->add_option("--columns", an.columns, "Comma-separated feature columns")->required();
    a->add_option("--out", an.out, "ANOVA CSV")->required();
    a->add_option("--quartiles", an.quartiles, "Quartile CSV (default: <out>_quartiles.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*s) return run_synth(synth);
        if (*f) return run_featurize(feat);
        if (*t) return run_train(tr);
        if (*e) return run_eval(ev);
        if (*c) {
            for (const auto& m : split_list(cmp.methods)) parse_pipeline(m);
            return run_compare(cmp);
        }
        if (*a) return run_anova_cmd(an);
    } catch (const ParamError& err) {
        std::cerr << "cvfusion: usage: " << err.what() << "\n";
        return kUsage;
    } catch (const IoError& err) {
        std::cerr << "cvfusion: io: " << err.what() << "\n";
        return kIo;
    } catch (const MissingFileError& err) {
        std::cerr << "cvfusion: io: " << err.what() << "\n";
        return kIo;
    } catch (const DegenerateError& err) {
        std::cerr << "cvfusion: degenerate: " << err.what() << "\n";
        return kDegenerate;
    } catch (const Error& err) {
        std::cerr << "cvfusion: data: " << err.what() << "\n";
        return kData;
    } catch (const std::exception& err) {
        std::cerr << "cvfusion: data: " << err.what() << "\n";
        return kData;
    }
    return kUsage;
}
