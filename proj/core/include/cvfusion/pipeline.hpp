#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvfusion/baselines.hpp"
#include "cvfusion/dataio.hpp"
#include "cvfusion/ecg_prep.hpp"
#include "cvfusion/evalstat.hpp"
#include "cvfusion/model.hpp"
#include "cvfusion/spectral.hpp"
#include "cvfusion/transport.hpp"

namespace cvfusion {

inline constexpr double kBandLow = 0.5;   // Hz
inline constexpr double kBandHigh = 50.0;  // Hz

// Scalar columns written after the classifier inputs; NA when unavailable.
inline const std::vector<std::string> kScalarColumns{"hrv_sdnn", "qrs_width_var", "mean_hr", "hf_ratio",
                                                     "tortuosity"};

struct RecordFeatures {
    std::string id;
    ClassLabel label;
    Split split = Split::unassigned;
    std::optional<Spectrum> ecg_spectrum;
    std::optional<Spectrum> fundus_spectrum;
    std::optional<WtFeatures> wt;
    std::optional<HogFeatures> hog;
    ScalarFeatures scalars;
    // Bandpassed signal, kept only when plots are requested.
    std::optional<EcgRecord> filtered;
};

struct ExtractOptions {
    Pipeline mode = Pipeline::fft_emd;
    bool keep_plot_data = false;  // also computes both spectra
};

/// Runs the per-record chain: ECG bandpass, R peaks, beats, spectra or
/// wavelet energies; fundus radial spectrum or HOG (OD and OS averaged when
/// both exist); scalar features and generator tortuosity when a truth file
/// is present. Parse and feature failures become DataError naming the record.
RecordFeatures extract_record(const ManifestEntry& entry, const ExtractOptions& options);

struct FeatureRow {
    std::string id;
    ClassLabel label;
    Split split = Split::unassigned;
    std::vector<double> inputs;
    std::map<std::string, std::optional<double>> scalars;
};

struct FeatureTable {
    std::vector<std::string> input_columns;
    std::vector<std::string> scalar_columns;
    std::vector<FeatureRow> rows;

    // Column values (inputs or scalars) in row order; nullopt for missing cells.
    std::vector<std::optional<double>> column(const std::string& name) const;
};

// 196 column names for a mode: feature names followed by pad_* columns.
std::vector<std::string> input_column_names(Pipeline mode, EmdRefs refs = EmdRefs::both);

struct FeaturizeResult {
    FeatureTable table;
    std::optional<TemplateBank> templates;  // fft-emd only
    std::vector<RecordFeatures> records;    // kept for plot emission
};

/// Extracts every manifest record in order. For fft-emd, templates are built
/// from the training split before EMD columns are computed.
FeaturizeResult featurize(const DatasetManifest& manifest, Pipeline mode, EmdRefs refs = EmdRefs::both,
                          bool keep_plot_data = false);

// Per-record waveform / ECG spectrum / radial spectrum CSVs in `dir`.
void write_plot_files(const RecordFeatures& record, const fs::path& dir);

Table feature_table_to_table(const FeatureTable& table);
// Input columns are recognized by prefix (ecg_fft_, fundus_rad_, emd_, wt_, hog_, pad_).
FeatureTable feature_table_from_csv(const CsvTable& csv);
FeatureTable read_feature_table(const fs::path& path);

// Rows of the given split (all rows when nullopt) over the named columns.
std::vector<Sample> make_samples(const FeatureTable& table, const std::vector<std::string>& columns,
                                 std::optional<Split> split);

// ---------------------------------------------------------------------------

struct TrainOutcome {
    Classifier model;
    std::vector<EpochStats> history;
};

/// "default": the convolutional network over all input columns.
/// "emd-mlp": a small dense network over the emd_* columns only.
/// Inputs are standardized with statistics from the training rows.
TrainOutcome train_classifier(const FeatureTable& table, const std::string& classifier, const TrainConfig& config);

Table history_table(const std::vector<EpochStats>& history);

struct EvalOutcome {
    ConfusionMatrix cm;
    std::array<ClassMetrics, kNumClasses> per_class;
    OverallMetrics overall;
    std::int64_t n = 0;
    std::vector<std::string> ids;
    std::vector<ClassLabel> truths;
    std::vector<Prediction> predictions;
};

// Throws DataError when the split is empty or a model input column is absent.
EvalOutcome evaluate(const Classifier& model, const FeatureTable& table, std::optional<Split> split);

// class,accuracy,sensitivity,specificity in percent with one decimal; 4 class rows + overall.
Table metrics_table(const EvalOutcome& outcome);
nlohmann::json metrics_json(const EvalOutcome& outcome);

std::string percent(const std::optional<double>& fraction);

// ---------------------------------------------------------------------------

struct AnovaRow {
    std::string feature;
    std::optional<AnovaResult> result;
    bool degenerate = false;  // zero within-group variance
    std::string error;        // non-empty when the column could not be tested
    std::array<std::optional<QuartileSummary>, kNumClasses> quartiles;
};

// One row per column, grouping values by joint class and skipping NA cells.
std::vector<AnovaRow> run_anova(const FeatureTable& table, const std::vector<std::string>& columns);

Table anova_table(const std::vector<AnovaRow>& rows);
Table quartile_table(const std::vector<AnovaRow>& rows);

}  // namespace cvfusion
