#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvfusion/baselines.hpp"
#include "cvfusion/dataio.hpp"
#include "cvfusion/spectral.hpp"

namespace cvfusion {

// ---------------------------------------------------------------------------
// Classifier input

enum class Pipeline { fft_emd, wt, hog };

std::string_view to_string(Pipeline p);
Pipeline parse_pipeline(std::string_view token);

inline constexpr int kInputLength = 196;
inline constexpr int kHogPooledLength = 192;

struct FeatureVector {
    std::vector<double> values;
    Pipeline pipeline = Pipeline::fft_emd;
};

// Components available for a record; only those required by the mode are read.
struct FeatureParts {
    std::optional<Spectrum> ecg_spectrum;
    std::optional<Spectrum> fundus_spectrum;
    std::optional<std::vector<double>> emd;
    std::optional<WtFeatures> wt;
    std::optional<HogFeatures> hog;
};

/// Builds the fixed-length (196) classifier input:
///   fft-emd  ecg weights (128) | fundus weights (64) | emd values, zero padded
///   wt       level energies, zero padded
///   hog      descriptor block-mean pooled to 192, then 4 zeros
/// Throws ParamError when a required component is missing or oversized.
FeatureVector assemble_input(Pipeline mode, const FeatureParts& parts);

// Contiguous near-equal chunk means: chunk i covers [floor(i L / n), floor((i+1) L / n)).
std::vector<double> block_mean_pool(std::span<const double> values, std::size_t n);

// ---------------------------------------------------------------------------
// Network

enum class LayerKind { conv1d, relu, maxpool, flatten, dense, softmax };

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int units = 0;   // conv1d: output channels, dense: output dimension
    int kernel = 0;  // conv1d only; odd

    static LayerSpec conv1d(int channels, int kernel) { return {LayerKind::conv1d, channels, kernel}; }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0}; }
    static LayerSpec maxpool() { return {LayerKind::maxpool, 0, 0}; }
    static LayerSpec flatten() { return {LayerKind::flatten, 0, 0}; }
    static LayerSpec dense(int out) { return {LayerKind::dense, out, 0}; }
    static LayerSpec softmax() { return {LayerKind::softmax, 0, 0}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
    int input_len = kInputLength;
    std::vector<LayerSpec> layers;
    std::uint64_t seed = 0;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Activation shape: channels x length. Dense layers produce (1, n).
struct Shape {
    int channels = 1;
    int length = 0;

    int size() const { return channels * length; }
};

// input 196 -> conv(8,5) relu pool -> conv(16,5) relu pool -> flatten
//           -> dense 64 relu -> dense 4 -> softmax
NetworkSpec default_spec(int input_len = kInputLength, std::uint64_t seed = 0);
// dense input_len -> 16 -> 16 -> 4 with ReLU, then softmax.
NetworkSpec emd_mlp_spec(int input_len = 4, std::uint64_t seed = 0);

/// Activation shapes after each layer (index i = output of layer i).
/// Throws SpecError when shapes do not chain, when softmax is not the single
/// last layer, or when the network does not end in dense(4) + softmax.
std::vector<Shape> infer_shapes(const NetworkSpec& spec);

struct LayerParams {
    std::vector<double> weights;  // conv: out x in x kernel; dense: out x in (row-major)
    std::vector<double> bias;
};

struct ModelWeights {
    std::vector<LayerParams> layers;  // one entry per spec layer, empty for parameter-free layers

    std::size_t parameter_count() const;
};

/// He-normal weights (std = sqrt(2 / fan_in)) from a counter-based stream
/// keyed by spec.seed and the layer index; zero biases.
ModelWeights init_network(const NetworkSpec& spec);

// Throws SpecError when the weights do not match the spec.
void check_weights(const ModelWeights& weights, const NetworkSpec& spec);

/// Pre-softmax scores. Convolutions use "same" zero padding:
///   y[o][z] = b[o] + sum_c sum_a W[o][c][a] * x[c][z + (A-1)/2 - a].
std::vector<double> logits(const ModelWeights& weights, const NetworkSpec& spec, std::span<const double> x);

// Class probabilities. Throws SpecError on shape mismatch.
std::vector<double> forward(const ModelWeights& weights, const NetworkSpec& spec, std::span<const double> x);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> z);

inline constexpr double kProbabilityFloor = 1e-12;

// -log(max(p_correct, 1e-12)); sets *clamped when the floor was applied.
double cross_entropy(std::span<const double> probs, int label, bool* clamped = nullptr);
double loss(std::span<const double> probs, const ClassLabel& label);

struct Sample {
    std::vector<double> x;
    int label = 0;  // class index
};

struct Gradients {
    ModelWeights grads;
    double loss = 0.0;  // mean cross-entropy over the batch
    int correct = 0;
    int clamped = 0;
};

/// Exact gradients of the mean cross-entropy over the batch with respect to
/// every weight and bias. Samples are reduced in index order.
Gradients backward(const ModelWeights& weights, const NetworkSpec& spec, std::span<const Sample> batch);

double batch_loss(const ModelWeights& weights, const NetworkSpec& spec, std::span<const Sample> batch);

// ---------------------------------------------------------------------------
// Optimization

struct TrainConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int epochs = 150;
    int batch_size = 16;
    std::uint64_t seed = 0;
    bool stratified = true;
};

// Throws ParamError on out-of-range hyperparameters.
void validate(const TrainConfig& config);

struct AdamState {
    ModelWeights m;
    ModelWeights v;
    std::int64_t step = 0;
};

AdamState make_adam_state(const ModelWeights& weights);

/// Adam with bias correction. Throws TrainError on a non-finite gradient,
/// leaving weights and state untouched.
void adam_step(AdamState& state, ModelWeights& weights, const ModelWeights& grads, const TrainConfig& config);

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;       // mean over the epoch's mini-batches, weighted by size
    double train_acc = 0.0;  // fraction correct during the epoch
    int clamped = 0;         // probabilities floored inside the log
};

struct TrainResult {
    ModelWeights weights;
    std::vector<EpochStats> history;
};

/// Mini-batch Adam training. Each epoch visits the data in an order drawn
/// from (seed, epoch); with stratification, classes are shuffled separately
/// and interleaved so every batch is as balanced as the data allows.
/// The network is initialized from spec.seed.
TrainResult train(std::span<const Sample> data, const NetworkSpec& spec, const TrainConfig& config);

// Visit order for one epoch.
std::vector<std::size_t> epoch_order(std::span<const Sample> data, std::uint64_t seed, int epoch, bool stratified);

// Argmax with ties broken toward the lowest class index.
int argmax_lowest(std::span<const double> values);

struct Prediction {
    ClassLabel label;
    std::vector<double> probs;
};

Prediction predict(const ModelWeights& weights, const NetworkSpec& spec, std::span<const double> x);

// ---------------------------------------------------------------------------
// Persisted classifier

/// Input standardization fitted on the training split: each feature is
/// centered on its mean and divided by the pooled standard deviation of its
/// block, so bins of one spectrum keep their relative scale. Features with
/// block -1 pass through unchanged.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Normalizer fit(std::span<const Sample> data, std::span<const int> blocks);
    std::vector<double> apply(std::span<const double> x) const;
    bool empty() const { return mean.empty(); }
};

struct Classifier {
    std::string classifier = "default";  // "default" or "emd-mlp"
    Pipeline pipeline = Pipeline::fft_emd;
    NetworkSpec spec;
    ModelWeights weights;
    Normalizer normalizer;
    std::vector<std::string> input_columns;
    std::optional<std::string> templates_path;
    std::uint64_t train_seed = 0;

    Prediction predict(std::span<const double> raw_features) const;
};

inline constexpr const char* kModelVersion = "1";

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& doc);

nlohmann::json model_to_json(const Classifier& model);
// Throws VersionError for unknown versions and FormatError for anything else malformed.
Classifier model_from_json(const nlohmann::json& doc);

void save_model(const Classifier& model, const fs::path& path);
Classifier load_model(const fs::path& path);

}  // namespace cvfusion
