#include "cvfusion/pipeline.hpp"

#include "cvfusion/error.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>

namespace cvfusion {

namespace {

std::string numbered(const char* prefix, int i) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%03d", prefix, i);
    return buf;
}

constexpr int kWtLevels = 5;
constexpr int kMinFundusSide = 16;

constexpr std::array<const char*, 5> kInputBlocks{"ecg_fft_", "fundus_rad_", "emd_", "wt_", "hog_"};

bool is_input_column(std::string_view name) {
    for (const char* p : kInputBlocks) {
        if (name.starts_with(p)) return true;
    }
    return name.starts_with("pad_");
}

// Normalizer block per column; padding passes through.
std::vector<int> column_blocks(const std::vector<std::string>& columns) {
    std::vector<int> blocks;
    for (const auto& c : columns) {
        int b = -1;
        for (std::size_t i = 0; i < kInputBlocks.size(); ++i) {
            if (c.starts_with(kInputBlocks[i])) b = static_cast<int>(i);
        }
        blocks.push_back(b);
    }
    return blocks;
}

Spectrum average_spectra(const Spectrum& a, const Spectrum& b) {
    std::vector<double> w(a.weights.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 * (a.weights[i] + b.weights[i]);
    Spectrum s = normalize(std::move(w), a.centers);
    s.degenerate = a.degenerate && b.degenerate;
    return s;
}

std::optional<double> scalar(const ScalarFeatures& f, const std::string& name) {
    const auto it = f.find(name);
    if (it == f.end() || !std::isfinite(it->second)) return std::nullopt;
    return it->second;
}

}  // namespace

std::vector<std::string> input_column_names(Pipeline mode, EmdRefs refs) {
    std::vector<std::string> names;
    switch (mode) {
        case Pipeline::fft_emd:
            for (int k = 0; k < kEcgSpectrumBins; ++k) names.push_back(numbered("ecg_fft_", k));
            for (int k = 0; k < kRadialBins; ++k) names.push_back(numbered("fundus_rad_", k));
            for (auto& n : emd_feature_names(refs)) names.push_back(std::move(n));
            break;
        case Pipeline::wt:
            for (int k = 1; k <= kWtLevels; ++k) names.push_back("wt_d" + std::to_string(k));
            names.push_back("wt_a" + std::to_string(kWtLevels));
            break;
        case Pipeline::hog:
            for (int k = 0; k < kHogPooledLength; ++k) names.push_back(numbered("hog_", k));
            break;
    }
    for (int k = 0; names.size() < static_cast<std::size_t>(kInputLength); ++k) names.push_back(numbered("pad_", k));
    return names;
}

std::vector<std::optional<double>> FeatureTable::column(const std::string& name) const {
    std::vector<std::optional<double>> out;
    out.reserve(rows.size());
    const auto in = std::find(input_columns.begin(), input_columns.end(), name);
    if (in != input_columns.end()) {
        const auto idx = static_cast<std::size_t>(in - input_columns.begin());
        for (const auto& r : rows) out.emplace_back(r.inputs[idx]);
        return out;
    }
    if (std::find(scalar_columns.begin(), scalar_columns.end(), name) == scalar_columns.end()) {
        throw DataError("feature table has no column '" + name + "'");
    }
    for (const auto& r : rows) {
        const auto it = r.scalars.find(name);
        out.push_back(it == r.scalars.end() ? std::nullopt : it->second);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Extraction

RecordFeatures extract_record(const ManifestEntry& entry, const ExtractOptions& options) {
    RecordFeatures rf;
    rf.id = entry.id;
    rf.label = entry.label();
    rf.split = entry.split;
    const bool want_spectra = options.mode == Pipeline::fft_emd || options.keep_plot_data;
    try {
        const EcgRecord raw = parse_ecg_csv(entry.ecg_path);
        const FilterKernel kernel = design_bandpass(raw.fs, kBandLow, kBandHigh);
        EcgRecord filtered = apply_filter(raw, kernel);
        const auto peaks = detect_r_peaks(filtered);
        const BeatSet beats = segment_beats(filtered, peaks);
        if (beats.empty()) throw DataError("no complete beats detected");
        if (want_spectra) rf.ecg_spectrum = beat_avg_spectrum(beats);
        if (options.mode == Pipeline::wt) rf.wt = wt_features(beats, kWtLevels);
        rf.scalars = ecg_scalar_features(filtered, peaks);

        const GrayImage od = parse_pgm(entry.fundus_od_path);
        std::optional<GrayImage> os;
        if (entry.fundus_os_path) os = parse_pgm(*entry.fundus_os_path);
        for (const GrayImage* img : {&od, os ? &*os : static_cast<const GrayImage*>(nullptr)}) {
            if (img && (img->width < kMinFundusSide || img->height < kMinFundusSide))
                throw DataError("fundus image smaller than " + std::to_string(kMinFundusSide) + " x " +
                                std::to_string(kMinFundusSide));
        }

        Spectrum radial = radial_spectrum(od);
        if (os) radial = average_spectra(radial, radial_spectrum(*os));
        rf.scalars["hf_ratio"] = high_frequency_ratio(radial);
        if (want_spectra) rf.fundus_spectrum = radial;

        if (options.mode == Pipeline::hog) {
            HogFeatures hog = hog_features(od);
            if (os) {
                const HogFeatures other = hog_features(*os);
                for (std::size_t i = 0; i < hog.descriptor.size(); ++i) {
                    hog.descriptor[i] = 0.5 * (hog.descriptor[i] + other.descriptor[i]);
                }
            }
            rf.hog = std::move(hog);
        }

        if (entry.truth_path) {
            const auto truth = nlohmann::json::parse(read_text_file(*entry.truth_path));
            if (const auto it = truth.find("tortuosity"); it != truth.end() && it->is_number()) {
                rf.scalars["tortuosity"] = it->get<double>();
            }
        }
        if (options.keep_plot_data) rf.filtered = std::move(filtered);
    } catch (const IoError&) {
        throw;
    } catch (const MissingFileError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("record '" + entry.id + "': truth file: " + e.what());
    } catch (const Error& e) {
        throw DataError("record '" + entry.id + "': " + e.what());
    }
    return rf;
}

FeaturizeResult featurize(const DatasetManifest& manifest, Pipeline mode, EmdRefs refs, bool keep_plot_data) {
    FeaturizeResult out;
    const ExtractOptions options{mode, keep_plot_data};
    out.records.reserve(manifest.records.size());
    for (const auto& e : manifest.records) out.records.push_back(extract_record(e, options));

    if (mode == Pipeline::fft_emd) {
        std::vector<RecordSpectra> spectra;
        spectra.reserve(out.records.size());
        for (const auto& r : out.records) spectra.push_back(RecordSpectra{r.id, *r.ecg_spectrum, *r.fundus_spectrum});
        out.templates = build_templates(manifest, spectra);
    }

    out.table.input_columns = input_column_names(mode, refs);
    out.table.scalar_columns = kScalarColumns;
    for (const auto& r : out.records) {
        FeatureParts parts;
        parts.ecg_spectrum = r.ecg_spectrum;
        parts.fundus_spectrum = r.fundus_spectrum;
        parts.wt = r.wt;
        parts.hog = r.hog;
        if (mode == Pipeline::fft_emd) {
            parts.emd = emd_features(*r.ecg_spectrum, *r.fundus_spectrum, *out.templates, refs);
        }
        FeatureRow row;
        row.id = r.id;
        row.label = r.label;
        row.split = r.split;
        row.inputs = assemble_input(mode, parts).values;
        for (const auto& name : kScalarColumns) row.scalars[name] = scalar(r.scalars, name);
        out.table.rows.push_back(std::move(row));
    }
    return out;
}

void write_plot_files(const RecordFeatures& record, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    if (record.filtered) {
        Table wave{{"time", "voltage"}, {}};
        const auto& f = *record.filtered;
        for (std::size_t i = 0; i < f.samples.size(); ++i) {
            wave.rows.push_back({static_cast<double>(i) / f.fs, f.samples[i]});
        }
        emit_report(wave, dir / (record.id + "_waveform.csv"), ReportFormat::csv);
    }
    if (record.ecg_spectrum) {
        // Beat windows are resampled to 256 points over 0.8 s.
        const double beat_rate = kBeatLength / (kBeatPre + kBeatPost);
        Table spec{{"freq", "magnitude"}, {}};
        const auto& s = *record.ecg_spectrum;
        for (std::size_t k = 0; k < s.weights.size(); ++k) spec.rows.push_back({s.centers[k] * beat_rate, s.weights[k]});
        emit_report(spec, dir / (record.id + "_ecg_fft.csv"), ReportFormat::csv);
    }
    if (record.fundus_spectrum) {
        Table spec{{"radius", "weight"}, {}};
        const auto& s = *record.fundus_spectrum;
        for (std::size_t k = 0; k < s.weights.size(); ++k) spec.rows.push_back({s.centers[k], s.weights[k]});
        emit_report(spec, dir / (record.id + "_radial.csv"), ReportFormat::csv);
    }
}

// ---------------------------------------------------------------------------
// Feature table I/O

Table feature_table_to_table(const FeatureTable& table) {
    Table t;
    t.columns = {"id", "class", "split"};
    t.columns.insert(t.columns.end(), table.input_columns.begin(), table.input_columns.end());
    t.columns.insert(t.columns.end(), table.scalar_columns.begin(), table.scalar_columns.end());
    for (const auto& r : table.rows) {
        std::vector<Cell> cells{r.id, std::string(to_string(r.label.joint)), std::string(to_string(r.split))};
        for (double v : r.inputs) cells.emplace_back(v);
        for (const auto& name : table.scalar_columns) {
            const auto it = r.scalars.find(name);
            if (it != r.scalars.end() && it->second) cells.emplace_back(*it->second);
            else cells.emplace_back(Missing{});
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

FeatureTable feature_table_from_csv(const CsvTable& csv) {
    const int id_col = csv.column_index("id");
    const int class_col = csv.column_index("class");
    const int split_col = csv.column_index("split");
    if (id_col < 0 || class_col < 0) throw DataError("feature table: needs 'id' and 'class' columns");

    FeatureTable t;
    std::vector<int> input_idx, scalar_idx;
    for (std::size_t c = 0; c < csv.columns.size(); ++c) {
        const auto& name = csv.columns[c];
        if (static_cast<int>(c) == id_col || static_cast<int>(c) == class_col || static_cast<int>(c) == split_col) {
            continue;
        }
        if (is_input_column(name)) {
            t.input_columns.push_back(name);
            input_idx.push_back(static_cast<int>(c));
        } else {
            t.scalar_columns.push_back(name);
            scalar_idx.push_back(static_cast<int>(c));
        }
    }

    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& cells = csv.rows[r];
        FeatureRow row;
        row.id = cells[id_col];
        try {
            row.label = ClassLabel::from_joint(parse_joint(cells[class_col]));
            row.split = split_col >= 0 ? parse_split(cells[split_col]) : Split::unassigned;
        } catch (const SchemaError& e) {
            throw DataError("feature table row '" + row.id + "': " + e.what());
        }
        for (int c : input_idx) {
            const auto v = parse_double(cells[c]);
            if (!v) {
                throw DataError("feature table row '" + row.id + "': column '" + csv.columns[c] +
                                "' is not a number");
            }
            row.inputs.push_back(*v);
        }
        for (std::size_t k = 0; k < scalar_idx.size(); ++k) {
            const auto& cell = cells[scalar_idx[k]];
            std::optional<double> v;
            if (cell != "NA" && !cell.empty()) {
                v = parse_double(cell);
                if (!v) {
                    throw DataError("feature table row '" + row.id + "': column '" + t.scalar_columns[k] +
                                    "' is not a number");
                }
            }
            row.scalars[t.scalar_columns[k]] = v;
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

FeatureTable read_feature_table(const fs::path& path) {
    CsvTable csv;
    try {
        csv = read_csv(path);
    } catch (const FormatError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return feature_table_from_csv(csv);
}

std::vector<Sample> make_samples(const FeatureTable& table, const std::vector<std::string>& columns,
                                 std::optional<Split> split) {
    std::vector<std::size_t> idx;
    for (const auto& name : columns) {
        const auto it = std::find(table.input_columns.begin(), table.input_columns.end(), name);
        if (it == table.input_columns.end()) throw DataError("feature table has no input column '" + name + "'");
        idx.push_back(static_cast<std::size_t>(it - table.input_columns.begin()));
    }
    std::vector<Sample> out;
    for (const auto& r : table.rows) {
        if (split && r.split != *split) continue;
        Sample s;
        s.label = r.label.index();
        s.x.reserve(idx.size());
        for (auto i : idx) s.x.push_back(r.inputs[i]);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training and evaluation

TrainOutcome train_classifier(const FeatureTable& table, const std::string& classifier, const TrainConfig& config) {
    std::vector<std::string> columns;
    if (classifier == "default") {
        columns = table.input_columns;
    } else if (classifier == "emd-mlp") {
        for (const auto& c : table.input_columns) {
            if (c.starts_with("emd_")) columns.push_back(c);
        }
        if (columns.empty()) throw DataError("emd-mlp needs emd_* columns (featurize with --mode fft-emd)");
    } else {
        throw ParamError("unknown classifier spec '" + classifier + "'");
    }
    if (columns.empty()) throw DataError("feature table has no input columns");

    auto samples = make_samples(table, columns, Split::train);
    if (samples.empty()) throw DataError("feature table has no training rows");

    TrainOutcome out;
    Classifier& m = out.model;
    m.classifier = classifier;
    m.input_columns = columns;
    m.train_seed = config.seed;
    if (!columns.empty()) {
        const auto& first = columns.front();
        m.pipeline = first.starts_with("wt_") ? Pipeline::wt : first.starts_with("hog_") ? Pipeline::hog
                                                                                        : Pipeline::fft_emd;
    }
    const int n_in = static_cast<int>(columns.size());
    m.spec = classifier == "default" ? default_spec(n_in, config.seed) : emd_mlp_spec(n_in, config.seed);

    m.normalizer = Normalizer::fit(samples, column_blocks(columns));
    for (auto& s : samples) s.x = m.normalizer.apply(s.x);
    TrainResult result = train(samples, m.spec, config);
    m.weights = std::move(result.weights);
    out.history = std::move(result.history);
    return out;
}

Table history_table(const std::vector<EpochStats>& history) {
    Table t{{"epoch", "loss", "train_acc"}, {}};
    for (const auto& h : history) t.rows.push_back({static_cast<std::int64_t>(h.epoch), h.loss, h.train_acc});
    return t;
}

EvalOutcome evaluate(const Classifier& model, const FeatureTable& table, std::optional<Split> split) {
    const auto samples = make_samples(table, model.input_columns, split);
    if (samples.empty()) throw DataError("no rows to evaluate in the requested split");
    EvalOutcome out;
    std::vector<ClassLabel> preds;
    for (const auto& r : table.rows) {
        if (split && r.split != *split) continue;
        out.ids.push_back(r.id);
        out.truths.push_back(r.label);
    }
    for (const auto& s : samples) {
        out.predictions.push_back(model.predict(s.x));
        preds.push_back(out.predictions.back().label);
    }
    out.cm = confusion(preds, out.truths);
    for (int k = 0; k < kNumClasses; ++k) out.per_class[k] = one_vs_rest_metrics(out.cm, ClassLabel::from_index(k));
    out.overall = overall_metrics(out.cm);
    out.n = out.cm.total();
    return out;
}

std::string percent(const std::optional<double>& fraction) {
    return fraction ? format_fixed(100.0 * *fraction, 1) : std::string("NA");
}

Table metrics_table(const EvalOutcome& outcome) {
    Table t{{"class", "accuracy", "sensitivity", "specificity"}, {}};
    for (int k = 0; k < kNumClasses; ++k) {
        const auto& m = outcome.per_class[k];
        t.rows.push_back({std::string(to_string(ClassLabel::from_index(k).joint)), percent(m.accuracy),
                          percent(m.sensitivity), percent(m.specificity)});
    }
    t.rows.push_back({std::string("overall"), percent(outcome.overall.accuracy), percent(outcome.overall.sensitivity),
                      percent(outcome.overall.specificity)});
    return t;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json metrics_json(const EvalOutcome& outcome) {
    nlohmann::json classes = nlohmann::json::array();
    for (int k = 0; k < kNumClasses; ++k) {
        const auto& m = outcome.per_class[k];
        classes.push_back({{"class", std::string(to_string(ClassLabel::from_index(k).joint))},
                           {"accuracy", optional_json(m.accuracy)},
                           {"sensitivity", optional_json(m.sensitivity)},
                           {"specificity", optional_json(m.specificity)},
                           {"tp", m.tp},
                           {"tn", m.tn},
                           {"fp", m.fp},
                           {"fn", m.fn}});
    }
    nlohmann::json cm = nlohmann::json::array();
    for (const auto& row : outcome.cm.counts) cm.push_back(row);
    return {{"n", outcome.n},
            {"confusion", cm},
            {"classes", classes},
            {"overall",
             {{"accuracy", optional_json(outcome.overall.accuracy)},
              {"sensitivity", optional_json(outcome.overall.sensitivity)},
              {"specificity", optional_json(outcome.overall.specificity)}}}};
}

// ---------------------------------------------------------------------------
// Statistics

std::vector<AnovaRow> run_anova(const FeatureTable& table, const std::vector<std::string>& columns) {
    std::vector<AnovaRow> out;
    for (const auto& name : columns) {
        AnovaRow row;
        row.feature = name;
        const auto values = table.column(name);
        std::vector<std::vector<double>> groups(kNumClasses);
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] && std::isfinite(*values[i])) groups[table.rows[i].label.index()].push_back(*values[i]);
        }
        for (int k = 0; k < kNumClasses; ++k) {
            if (!groups[k].empty()) row.quartiles[k] = quartile_summary(groups[k]);
        }
        try {
            row.result = anova_f(groups, name);
        } catch (const DegenerateError& e) {
            row.degenerate = true;
            row.error = e.what();
        } catch (const ParamError& e) {
            row.error = e.what();
        }
        out.push_back(std::move(row));
    }
    return out;
}

Table anova_table(const std::vector<AnovaRow>& rows) {
    Table t{{"feature", "f_stat", "p_value", "significant"}, {}};
    for (const auto& r : rows) {
        if (r.result) {
            t.rows.push_back({r.feature, r.result->f_stat, r.result->p_value,
                              std::string(r.result->significant ? "yes" : "no")});
        } else if (r.degenerate) {
            t.rows.push_back({r.feature, std::string("inf"), Missing{}, Missing{}});
        } else {
            t.rows.push_back({r.feature, Missing{}, Missing{}, Missing{}});
        }
    }
    return t;
}

Table quartile_table(const std::vector<AnovaRow>& rows) {
    Table t{{"feature", "class", "min", "q1", "median", "q3", "max"}, {}};
    for (const auto& r : rows) {
        for (int k = 0; k < kNumClasses; ++k) {
            const std::string cls(to_string(ClassLabel::from_index(k).joint));
            if (const auto& q = r.quartiles[k]) {
                t.rows.push_back({r.feature, cls, q->min, q->q1, q->median, q->q3, q->max});
            } else {
                t.rows.push_back({r.feature, cls, Missing{}, Missing{}, Missing{}, Missing{}, Missing{}});
            }
        }
    }
    return t;
}

}  // namespace cvfusion
