#include "cvfusion/model.hpp"

#include "cvfusion/error.hpp"
#include "cvfusion/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace cvfusion {

// ---------------------------------------------------------------------------
// Classifier input

std::string_view to_string(Pipeline p) {
    switch (p) {
        case Pipeline::fft_emd: return "fft-emd";
        case Pipeline::wt: return "wt";
        case Pipeline::hog: return "hog";
    }
    return "fft-emd";
}

Pipeline parse_pipeline(std::string_view token) {
    if (token == "fft-emd") return Pipeline::fft_emd;
    if (token == "wt") return Pipeline::wt;
    if (token == "hog") return Pipeline::hog;
    throw ParamError("unknown pipeline '" + std::string(token) + "'");
}

std::vector<double> block_mean_pool(std::span<const double> values, std::size_t n) {
    if (n == 0) return {};
    const std::size_t len = values.size();
    std::vector<double> out(n, 0.0);
    if (len <= n) {
        std::copy(values.begin(), values.end(), out.begin());
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i * len / n;
        const std::size_t b = (i + 1) * len / n;
        double sum = 0.0;
        for (std::size_t j = a; j < b; ++j) sum += values[j];
        out[i] = sum / static_cast<double>(b - a);
    }
    return out;
}

FeatureVector assemble_input(Pipeline mode, const FeatureParts& parts) {
    FeatureVector fv;
    fv.pipeline = mode;
    fv.values.reserve(kInputLength);
    switch (mode) {
        case Pipeline::fft_emd: {
            if (!parts.ecg_spectrum || !parts.fundus_spectrum || !parts.emd) {
                throw ParamError("assemble_input: fft-emd needs both spectra and EMD values");
            }
            const auto& e = parts.ecg_spectrum->weights;
            const auto& f = parts.fundus_spectrum->weights;
            if (e.size() != kEcgSpectrumBins || f.size() != kRadialBins) {
                throw ParamError("assemble_input: spectra must have 128 (ECG) and 64 (fundus) bins");
            }
            if (parts.emd->size() > kInputLength - e.size() - f.size()) {
                throw ParamError("assemble_input: too many EMD values");
            }
            fv.values.insert(fv.values.end(), e.begin(), e.end());
            fv.values.insert(fv.values.end(), f.begin(), f.end());
            fv.values.insert(fv.values.end(), parts.emd->begin(), parts.emd->end());
            break;
        }
        case Pipeline::wt: {
            if (!parts.wt) throw ParamError("assemble_input: wt mode needs wavelet energies");
            const auto& w = parts.wt->level_energies;
            if (w.size() > kInputLength) throw ParamError("assemble_input: too many wavelet energies");
            fv.values.insert(fv.values.end(), w.begin(), w.end());
            break;
        }
        case Pipeline::hog: {
            if (!parts.hog) throw ParamError("assemble_input: hog mode needs a HOG descriptor");
            fv.values = block_mean_pool(parts.hog->descriptor, kHogPooledLength);
            break;
        }
    }
    fv.values.resize(kInputLength, 0.0);
    return fv;
}

// ---------------------------------------------------------------------------
// Network specification

NetworkSpec default_spec(int input_len, std::uint64_t seed) {
    return NetworkSpec{input_len,
                       {LayerSpec::conv1d(8, 5), LayerSpec::relu(), LayerSpec::maxpool(), LayerSpec::conv1d(16, 5),
                        LayerSpec::relu(), LayerSpec::maxpool(), LayerSpec::flatten(), LayerSpec::dense(64),
                        LayerSpec::relu(), LayerSpec::dense(kNumClasses), LayerSpec::softmax()},
                       seed};
}

NetworkSpec emd_mlp_spec(int input_len, std::uint64_t seed) {
    return NetworkSpec{input_len,
                       {LayerSpec::dense(16), LayerSpec::relu(), LayerSpec::dense(16), LayerSpec::relu(),
                        LayerSpec::dense(kNumClasses), LayerSpec::softmax()},
                       seed};
}

std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
    if (spec.input_len < 1) throw SpecError("network: input_len must be positive");
    if (spec.layers.size() < 2) throw SpecError("network: needs at least dense(4) + softmax");
    Shape shape{1, spec.input_len};
    std::vector<Shape> shapes;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& layer = spec.layers[i];
        const std::string where = "network layer " + std::to_string(i);
        switch (layer.kind) {
            case LayerKind::conv1d:
                if (layer.units < 1 || layer.kernel < 1 || layer.kernel % 2 == 0) {
                    throw SpecError(where + ": conv1d needs positive channels and an odd kernel");
                }
                shape = Shape{layer.units, shape.length};
                break;
            case LayerKind::relu:
                break;
            case LayerKind::maxpool:
                if (shape.length < 2) throw SpecError(where + ": maxpool on length < 2");
                shape.length /= 2;
                break;
            case LayerKind::flatten:
                shape = Shape{1, shape.size()};
                break;
            case LayerKind::dense:
                if (layer.units < 1) throw SpecError(where + ": dense needs a positive output size");
                if (shape.channels != 1) throw SpecError(where + ": dense input must be flattened");
                shape = Shape{1, layer.units};
                break;
            case LayerKind::softmax:
                if (i + 1 != spec.layers.size()) throw SpecError(where + ": softmax must be the last layer");
                break;
        }
        shapes.push_back(shape);
    }
    const auto& last = spec.layers.back();
    const auto& before = spec.layers[spec.layers.size() - 2];
    if (last.kind != LayerKind::softmax || before.kind != LayerKind::dense || before.units != kNumClasses) {
        throw SpecError("network: must end with dense(4) + softmax");
    }
    return shapes;
}

std::size_t ModelWeights::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

namespace {

struct LayerGeometry {
    std::size_t weights = 0;
    std::size_t bias = 0;
    std::size_t fan_in = 0;
};

std::vector<LayerGeometry> geometry(const NetworkSpec& spec) {
    const auto shapes = infer_shapes(spec);
    std::vector<LayerGeometry> geo(spec.layers.size());
    Shape in{1, spec.input_len};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& layer = spec.layers[i];
        if (layer.kind == LayerKind::conv1d) {
            geo[i].fan_in = static_cast<std::size_t>(in.channels) * layer.kernel;
            geo[i].weights = static_cast<std::size_t>(layer.units) * geo[i].fan_in;
            geo[i].bias = static_cast<std::size_t>(layer.units);
        } else if (layer.kind == LayerKind::dense) {
            geo[i].fan_in = static_cast<std::size_t>(in.size());
            geo[i].weights = static_cast<std::size_t>(layer.units) * geo[i].fan_in;
            geo[i].bias = static_cast<std::size_t>(layer.units);
        }
        in = shapes[i];
    }
    return geo;
}

}  // namespace

ModelWeights init_network(const NetworkSpec& spec) {
    const auto geo = geometry(spec);
    ModelWeights w;
    w.layers.resize(spec.layers.size());
    const CounterRng root(derive_key(spec.seed, 0x1417));
    for (std::size_t i = 0; i < geo.size(); ++i) {
        if (geo[i].weights == 0) continue;
        CounterRng rng = root.split(i);
        const double stddev = std::sqrt(2.0 / static_cast<double>(geo[i].fan_in));
        w.layers[i].weights.resize(geo[i].weights);
        for (double& v : w.layers[i].weights) v = rng.normal(0.0, stddev);
        w.layers[i].bias.assign(geo[i].bias, 0.0);
    }
    return w;
}

void check_weights(const ModelWeights& weights, const NetworkSpec& spec) {
    const auto geo = geometry(spec);
    if (weights.layers.size() != geo.size()) throw SpecError("weights: layer count does not match spec");
    for (std::size_t i = 0; i < geo.size(); ++i) {
        if (weights.layers[i].weights.size() != geo[i].weights || weights.layers[i].bias.size() != geo[i].bias) {
            throw SpecError("weights: layer " + std::to_string(i) + " has the wrong size");
        }
    }
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

struct Trace {
    std::vector<Shape> shapes;                 // shapes[i] = output of layer i
    std::vector<std::vector<double>> acts;     // acts[0] = input, acts[i + 1] = output of layer i
    std::vector<std::vector<std::size_t>> argmax;  // maxpool winners, per layer
};

void conv_forward(const LayerParams& p, const Shape& in, int out_ch, int kernel, std::span<const double> x,
                  std::vector<double>& y) {
    const int len = in.length;
    const int pad = (kernel - 1) / 2;
    y.assign(static_cast<std::size_t>(out_ch) * len, 0.0);
    for (int o = 0; o < out_ch; ++o) {
        double* yo = y.data() + static_cast<std::size_t>(o) * len;
        for (int z = 0; z < len; ++z) yo[z] = p.bias[o];
        for (int c = 0; c < in.channels; ++c) {
            const double* xc = x.data() + static_cast<std::size_t>(c) * len;
            const double* wk = p.weights.data() + (static_cast<std::size_t>(o) * in.channels + c) * kernel;
            for (int a = 0; a < kernel; ++a) {
                const double w = wk[a];
                const int shift = pad - a;
                const int z0 = std::max(0, -shift);
                const int z1 = std::min(len, len - shift);
                for (int z = z0; z < z1; ++z) yo[z] += w * xc[z + shift];
            }
        }
    }
}

void conv_backward(const LayerParams& p, LayerParams& g, const Shape& in, int out_ch, int kernel,
                   std::span<const double> x, std::span<const double> dy, std::vector<double>& dx) {
    const int len = in.length;
    const int pad = (kernel - 1) / 2;
    dx.assign(static_cast<std::size_t>(in.channels) * len, 0.0);
    for (int o = 0; o < out_ch; ++o) {
        const double* dyo = dy.data() + static_cast<std::size_t>(o) * len;
        double bsum = 0.0;
        for (int z = 0; z < len; ++z) bsum += dyo[z];
        g.bias[o] += bsum;
        for (int c = 0; c < in.channels; ++c) {
            const double* xc = x.data() + static_cast<std::size_t>(c) * len;
            double* dxc = dx.data() + static_cast<std::size_t>(c) * len;
            const std::size_t wbase = (static_cast<std::size_t>(o) * in.channels + c) * kernel;
            for (int a = 0; a < kernel; ++a) {
                const double w = p.weights[wbase + a];
                const int shift = pad - a;
                const int z0 = std::max(0, -shift);
                const int z1 = std::min(len, len - shift);
                double gw = 0.0;
                for (int z = z0; z < z1; ++z) {
                    gw += dyo[z] * xc[z + shift];
                    dxc[z + shift] += dyo[z] * w;
                }
                g.weights[wbase + a] += gw;
            }
        }
    }
}

Trace run_forward(const ModelWeights& weights, const NetworkSpec& spec, std::span<const double> x) {
    if (static_cast<int>(x.size()) != spec.input_len) {
        throw SpecError("forward: input length " + std::to_string(x.size()) + " != " + std::to_string(spec.input_len));
    }
    Trace t;
    t.shapes = infer_shapes(spec);
    check_weights(weights, spec);
    t.acts.resize(spec.layers.size() + 1);
    t.argmax.resize(spec.layers.size());
    t.acts[0].assign(x.begin(), x.end());
    Shape in{1, spec.input_len};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& layer = spec.layers[i];
        const auto& xin = t.acts[i];
        auto& y = t.acts[i + 1];
        switch (layer.kind) {
            case LayerKind::conv1d:
                conv_forward(weights.layers[i], in, layer.units, layer.kernel, xin, y);
                break;
            case LayerKind::relu:
                y = xin;
                for (double& v : y) v = v > 0.0 ? v : 0.0;
                break;
            case LayerKind::maxpool: {
                const int out_len = in.length / 2;
                y.assign(static_cast<std::size_t>(in.channels) * out_len, 0.0);
                auto& idx = t.argmax[i];
                idx.assign(y.size(), 0);
                for (int c = 0; c < in.channels; ++c) {
                    for (int k = 0; k < out_len; ++k) {
                        const std::size_t a = static_cast<std::size_t>(c) * in.length + 2 * k;
                        const std::size_t o = static_cast<std::size_t>(c) * out_len + k;
                        const std::size_t win = xin[a] >= xin[a + 1] ? a : a + 1;
                        y[o] = xin[win];
                        idx[o] = win;
                    }
                }
                break;
            }
            case LayerKind::flatten:
                y = xin;
                break;
            case LayerKind::dense: {
                const auto& p = weights.layers[i];
                const std::size_t n_in = xin.size();
                y.assign(static_cast<std::size_t>(layer.units), 0.0);
                for (int j = 0; j < layer.units; ++j) {
                    const double* wj = p.weights.data() + static_cast<std::size_t>(j) * n_in;
                    double acc = p.bias[j];
                    for (std::size_t k = 0; k < n_in; ++k) acc += wj[k] * xin[k];
                    y[j] = acc;
                }
                break;
            }
            case LayerKind::softmax:
                y = softmax(xin);
                break;
        }
        in = t.shapes[i];
    }
    return t;
}

ModelWeights zeros_like(const ModelWeights& w) {
    ModelWeights z;
    z.layers.resize(w.layers.size());
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        z.layers[i].weights.assign(w.layers[i].weights.size(), 0.0);
        z.layers[i].bias.assign(w.layers[i].bias.size(), 0.0);
    }
    return z;
}

}  // namespace

std::vector<double> softmax(std::span<const double> z) {
    if (z.empty()) return {};
    const double mx = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

std::vector<double> logits(const ModelWeights& weights, const NetworkSpec& spec, std::span<const double> x) {
    auto t = run_forward(weights, spec, x);
    return std::move(t.acts[spec.layers.size() - 1]);
}

std::vector<double> forward(const ModelWeights& weights, const NetworkSpec& spec, std::span<const double> x) {
    auto t = run_forward(weights, spec, x);
    return std::move(t.acts.back());
}

double cross_entropy(std::span<const double> probs, int label, bool* clamped) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) throw ParamError("cross_entropy: bad label");
    double p = probs[label];
    const bool floored = !(p > kProbabilityFloor);
    if (floored) p = kProbabilityFloor;
    if (clamped) *clamped = floored;
    return -std::log(p);
}

double loss(std::span<const double> probs, const ClassLabel& label) { return cross_entropy(probs, label.index()); }

Gradients backward(const ModelWeights& weights, const NetworkSpec& spec, std::span<const Sample> batch) {
    if (batch.empty()) throw ParamError("backward: empty batch");
    Gradients out;
    out.grads = zeros_like(weights);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const std::size_t n_layers = spec.layers.size();

    std::vector<double> dy, dx;
    for (const auto& sample : batch) {
        const Trace t = run_forward(weights, spec, sample.x);
        const auto& probs = t.acts.back();
        bool clamped = false;
        out.loss += cross_entropy(probs, sample.label, &clamped) * inv_b;
        out.clamped += clamped ? 1 : 0;
        out.correct += argmax_lowest(probs) == sample.label ? 1 : 0;

        // Softmax + cross-entropy: d loss / d logits = p - onehot.
        dy = probs;
        dy[sample.label] -= 1.0;
        for (double& v : dy) v *= inv_b;

        for (std::size_t li = n_layers - 1; li-- > 0;) {
            const auto& layer = spec.layers[li];
            const auto& xin = t.acts[li];
            const Shape in = li == 0 ? Shape{1, spec.input_len} : t.shapes[li - 1];
            switch (layer.kind) {
                case LayerKind::conv1d:
                    conv_backward(weights.layers[li], out.grads.layers[li], in, layer.units, layer.kernel, xin, dy, dx);
                    break;
                case LayerKind::relu:
                    dx = dy;
                    for (std::size_t k = 0; k < dx.size(); ++k) {
                        if (!(xin[k] > 0.0)) dx[k] = 0.0;
                    }
                    break;
                case LayerKind::maxpool: {
                    dx.assign(xin.size(), 0.0);
                    const auto& idx = t.argmax[li];
                    for (std::size_t k = 0; k < dy.size(); ++k) dx[idx[k]] += dy[k];
                    break;
                }
                case LayerKind::flatten:
                    dx = dy;
                    break;
                case LayerKind::dense: {
                    const auto& p = weights.layers[li];
                    auto& g = out.grads.layers[li];
                    const std::size_t n_in = xin.size();
                    dx.assign(n_in, 0.0);
                    for (int j = 0; j < layer.units; ++j) {
                        const double d = dy[j];
                        g.bias[j] += d;
                        const double* wj = p.weights.data() + static_cast<std::size_t>(j) * n_in;
                        double* gj = g.weights.data() + static_cast<std::size_t>(j) * n_in;
                        for (std::size_t k = 0; k < n_in; ++k) {
                            gj[k] += d * xin[k];
                            dx[k] += d * wj[k];
                        }
                    }
                    break;
                }
                case LayerKind::softmax:
                    throw SpecError("backward: softmax must be the last layer");
            }
            std::swap(dy, dx);
        }
    }
    return out;
}

double batch_loss(const ModelWeights& weights, const NetworkSpec& spec, std::span<const Sample> batch) {
    if (batch.empty()) throw ParamError("batch_loss: empty batch");
    double total = 0.0;
    for (const auto& s : batch) total += cross_entropy(forward(weights, spec, s.x), s.label);
    return total / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------
// Optimization

void validate(const TrainConfig& config) {
    if (!(config.lr > 0.0)) throw ParamError("train: lr must be positive");
    if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
        throw ParamError("train: betas must lie in [0, 1)");
    }
    if (!(config.eps > 0.0)) throw ParamError("train: eps must be positive");
    if (config.batch_size < 1) throw ParamError("train: batch_size must be >= 1");
    if (config.epochs < 0) throw ParamError("train: epochs must be >= 0");
}

AdamState make_adam_state(const ModelWeights& weights) { return AdamState{zeros_like(weights), zeros_like(weights), 0}; }

void adam_step(AdamState& state, ModelWeights& weights, const ModelWeights& grads, const TrainConfig& config) {
    if (grads.layers.size() != weights.layers.size() || state.m.layers.size() != weights.layers.size()) {
        throw SpecError("adam_step: state shapes do not match weights");
    }
    for (std::size_t i = 0; i < grads.layers.size(); ++i) {
        const auto& g = grads.layers[i];
        if (g.weights.size() != weights.layers[i].weights.size() || g.bias.size() != weights.layers[i].bias.size()) {
            throw SpecError("adam_step: gradient shapes do not match weights");
        }
        for (double v : g.weights) {
            if (!std::isfinite(v)) throw TrainError("adam_step: non-finite gradient in layer " + std::to_string(i));
        }
        for (double v : g.bias) {
            if (!std::isfinite(v)) throw TrainError("adam_step: non-finite gradient in layer " + std::to_string(i));
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    auto update = [&](std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t k = 0; k < theta.size(); ++k) {
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
            v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
            const double m_hat = m[k] / c1;
            const double v_hat = v[k] / c2;
            theta[k] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
        }
    };
    for (std::size_t i = 0; i < weights.layers.size(); ++i) {
        update(weights.layers[i].weights, grads.layers[i].weights, state.m.layers[i].weights,
               state.v.layers[i].weights);
        update(weights.layers[i].bias, grads.layers[i].bias, state.m.layers[i].bias, state.v.layers[i].bias);
    }
}

std::vector<std::size_t> epoch_order(std::span<const Sample> data, std::uint64_t seed, int epoch, bool stratified) {
    const CounterRng epoch_rng(derive_key(derive_key(seed, 0xE90C), static_cast<std::uint64_t>(epoch)));
    auto shuffle = [](std::vector<std::size_t>& v, CounterRng rng) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.below(i));
            std::swap(v[i - 1], v[j]);
        }
    };
    if (!stratified) {
        std::vector<std::size_t> order(data.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle(order, epoch_rng);
        return order;
    }
    int max_label = 0;
    for (const auto& s : data) max_label = std::max(max_label, s.label);
    std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(max_label) + 1);
    for (std::size_t i = 0; i < data.size(); ++i) groups[data[i].label].push_back(i);
    for (std::size_t g = 0; g < groups.size(); ++g) shuffle(groups[g], epoch_rng.split(g));

    // Round-robin across classes, starting class rotated per epoch.
    std::vector<std::size_t> order;
    order.reserve(data.size());
    std::vector<std::size_t> cursor(groups.size(), 0);
    const std::size_t offset = static_cast<std::size_t>(epoch_rng.split(0xFFFF).below(groups.size()));
    while (order.size() < data.size()) {
        for (std::size_t k = 0; k < groups.size(); ++k) {
            const std::size_t g = (k + offset) % groups.size();
            if (cursor[g] < groups[g].size()) order.push_back(groups[g][cursor[g]++]);
        }
    }
    return order;
}

TrainResult train(std::span<const Sample> data, const NetworkSpec& spec, const TrainConfig& config) {
    validate(config);
    if (data.empty()) throw ParamError("train: empty dataset");
    for (const auto& s : data) {
        if (static_cast<int>(s.x.size()) != spec.input_len) throw ParamError("train: feature length mismatch");
        if (s.label < 0 || s.label >= kNumClasses) throw ParamError("train: label out of range");
    }

    TrainResult result;
    result.weights = init_network(spec);
    AdamState state = make_adam_state(result.weights);
    std::vector<Sample> batch;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto order = epoch_order(data, config.seed, epoch, config.stratified);
        double loss_sum = 0.0;
        int correct = 0;
        int clamped = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
            const auto g = backward(result.weights, spec, batch);
            loss_sum += g.loss * static_cast<double>(batch.size());
            correct += g.correct;
            clamped += g.clamped;
            adam_step(state, result.weights, g.grads, config);
        }
        const double n = static_cast<double>(data.size());
        result.history.push_back(EpochStats{epoch, loss_sum / n, correct / n, clamped});
    }
    return result;
}

int argmax_lowest(std::span<const double> values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = static_cast<int>(i);
    }
    return best;
}

Prediction predict(const ModelWeights& weights, const NetworkSpec& spec, std::span<const double> x) {
    auto probs = forward(weights, spec, x);
    return Prediction{ClassLabel::from_index(argmax_lowest(probs)), std::move(probs)};
}

// ---------------------------------------------------------------------------
// Persisted classifier

Normalizer Normalizer::fit(std::span<const Sample> data, std::span<const int> blocks) {
    Normalizer n;
    if (data.empty()) return n;
    const std::size_t dim = data.front().x.size();
    if (blocks.size() != dim) throw ParamError("normalizer: one block id per feature required");
    n.mean.assign(dim, 0.0);
    n.scale.assign(dim, 1.0);
    for (const auto& s : data) {
        for (std::size_t k = 0; k < dim; ++k) n.mean[k] += s.x[k];
    }
    for (std::size_t k = 0; k < dim; ++k) {
        n.mean[k] = blocks[k] < 0 ? 0.0 : n.mean[k] / static_cast<double>(data.size());
    }

    std::map<int, std::pair<double, std::size_t>> pooled;  // block -> (sum of squares, count)
    for (const auto& s : data) {
        for (std::size_t k = 0; k < dim; ++k) {
            if (blocks[k] < 0) continue;
            const double d = s.x[k] - n.mean[k];
            auto& acc = pooled[blocks[k]];
            acc.first += d * d;
            ++acc.second;
        }
    }
    for (std::size_t k = 0; k < dim; ++k) {
        if (blocks[k] < 0) continue;
        const auto& acc = pooled[blocks[k]];
        const double sd = std::sqrt(acc.first / static_cast<double>(acc.second));
        n.scale[k] = sd > 1e-12 ? sd : 1.0;
    }
    return n;
}

std::vector<double> Normalizer::apply(std::span<const double> x) const {
    if (empty()) return {x.begin(), x.end()};
    if (x.size() != mean.size()) throw SpecError("normalizer: feature length mismatch");
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = (x[k] - mean[k]) / scale[k];
    return out;
}

Prediction Classifier::predict(std::span<const double> raw_features) const {
    const auto x = normalizer.apply(raw_features);
    return cvfusion::predict(weights, spec, x);
}

namespace {

std::string_view layer_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv1d: return "conv1d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dense: return "dense";
        case LayerKind::softmax: return "softmax";
    }
    return "relu";
}

LayerKind parse_layer(std::string_view name) {
    if (name == "conv1d") return LayerKind::conv1d;
    if (name == "relu") return LayerKind::relu;
    if (name == "maxpool") return LayerKind::maxpool;
    if (name == "flatten") return LayerKind::flatten;
    if (name == "dense") return LayerKind::dense;
    if (name == "softmax") return LayerKind::softmax;
    throw FormatError("model: unknown layer type '" + std::string(name) + "'");
}

}  // namespace

nlohmann::json spec_to_json(const NetworkSpec& spec) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : spec.layers) {
        nlohmann::json j{{"type", std::string(layer_name(l.kind))}};
        if (l.kind == LayerKind::conv1d) {
            j["out_channels"] = l.units;
            j["kernel"] = l.kernel;
            j["stride"] = 1;
        } else if (l.kind == LayerKind::dense) {
            j["out_dim"] = l.units;
        } else if (l.kind == LayerKind::maxpool) {
            j["size"] = 2;
        }
        layers.push_back(std::move(j));
    }
    return {{"input_len", spec.input_len}, {"layers", layers}, {"seed", spec.seed}};
}

NetworkSpec spec_from_json(const nlohmann::json& doc) {
    try {
        NetworkSpec spec;
        spec.input_len = doc.at("input_len").get<int>();
        spec.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& j : doc.at("layers")) {
            LayerSpec l;
            l.kind = parse_layer(j.at("type").get<std::string>());
            if (l.kind == LayerKind::conv1d) {
                l.units = j.at("out_channels").get<int>();
                l.kernel = j.at("kernel").get<int>();
                if (j.value("stride", 1) != 1) throw FormatError("model: only stride 1 is supported");
            } else if (l.kind == LayerKind::dense) {
                l.units = j.at("out_dim").get<int>();
            } else if (l.kind == LayerKind::maxpool) {
                if (j.value("size", 2) != 2) throw FormatError("model: only maxpool(2) is supported");
            }
            spec.layers.push_back(l);
        }
        infer_shapes(spec);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model spec: ") + e.what());
    } catch (const SpecError& e) {
        throw FormatError(std::string("model spec: ") + e.what());
    }
}

nlohmann::json model_to_json(const Classifier& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t i = 0; i < model.weights.layers.size(); ++i) {
        const auto& l = model.weights.layers[i];
        if (l.weights.empty() && l.bias.empty()) continue;
        layers.push_back({{"layer", i}, {"W", l.weights}, {"b", l.bias}});
    }
    nlohmann::json doc{{"version", kModelVersion},
                       {"pipeline", std::string(to_string(model.pipeline))},
                       {"classifier", model.classifier},
                       {"spec", spec_to_json(model.spec)},
                       {"weights", {{"layers", layers}}},
                       {"normalizer", {{"mean", model.normalizer.mean}, {"scale", model.normalizer.scale}}},
                       {"input_columns", model.input_columns},
                       {"train_seed", model.train_seed}};
    if (model.templates_path) doc["templates_path"] = *model.templates_path;
    return doc;
}

Classifier model_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw FormatError("model: expected a JSON object");
    const auto version = doc.find("version");
    if (version == doc.end() || !version->is_string()) throw FormatError("model: missing version");
    if (version->get<std::string>() != kModelVersion) {
        throw VersionError("model: unsupported version '" + version->get<std::string>() + "'");
    }
    try {
        Classifier m;
        m.pipeline = parse_pipeline(doc.at("pipeline").get<std::string>());
        m.classifier = doc.value("classifier", std::string("default"));
        m.spec = spec_from_json(doc.at("spec"));
        m.weights.layers.resize(m.spec.layers.size());
        for (const auto& l : doc.at("weights").at("layers")) {
            const auto i = l.at("layer").get<std::size_t>();
            if (i >= m.weights.layers.size()) throw FormatError("model: weight layer index out of range");
            m.weights.layers[i].weights = l.at("W").get<std::vector<double>>();
            m.weights.layers[i].bias = l.at("b").get<std::vector<double>>();
        }
        check_weights(m.weights, m.spec);
        if (const auto it = doc.find("normalizer"); it != doc.end()) {
            m.normalizer.mean = it->at("mean").get<std::vector<double>>();
            m.normalizer.scale = it->at("scale").get<std::vector<double>>();
            if (m.normalizer.mean.size() != m.normalizer.scale.size() ||
                (!m.normalizer.empty() && static_cast<int>(m.normalizer.mean.size()) != m.spec.input_len)) {
                throw FormatError("model: normalizer does not match input length");
            }
        }
        m.input_columns = doc.value("input_columns", std::vector<std::string>{});
        if (const auto it = doc.find("templates_path"); it != doc.end() && !it->is_null()) {
            m.templates_path = it->get<std::string>();
        }
        m.train_seed = doc.at("train_seed").get<std::uint64_t>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model: ") + e.what());
    } catch (const SpecError& e) {
        throw FormatError(std::string("model: ") + e.what());
    } catch (const ParamError& e) {
        throw FormatError(std::string("model: ") + e.what());
    }
}

void save_model(const Classifier& model, const fs::path& path) {
    // Full round-trip precision: weights are not rounded like report values.
    write_text_file(path, model_to_json(model).dump(1) + "\n");
}

Classifier load_model(const fs::path& path) {
    const std::string text = read_text_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("model " + path.string() + ": " + e.what());
    }
    return model_from_json(doc);
}

}  // namespace cvfusion
