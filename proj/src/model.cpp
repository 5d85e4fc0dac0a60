#include "wig/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "wig/error.hpp"
#include "wig/io.hpp"

namespace wig {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double softplus(double z) {
    if (z > 30.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double apply_activation(ActivationKind k, double z) {
    switch (k) {
        case ActivationKind::Relu: return z > 0.0 ? z : 0.0;
        case ActivationKind::Softplus: return softplus(z);
        case ActivationKind::Tanh: return std::tanh(z);
    }
    throw ValueError("unknown activation");
}

double activation_derivative(ActivationKind k, double z) {
    switch (k) {
        case ActivationKind::Relu: return z > 0.0 ? 1.0 : 0.0;
        case ActivationKind::Softplus: return sigmoid(z);
        case ActivationKind::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
    }
    throw ValueError("unknown activation");
}

std::vector<double> softmax(const std::vector<double>& z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        denom += p[i];
    }
    for (double& v : p) v /= denom;
    return p;
}

std::vector<std::size_t> layer_output_shape(const LayerSpec& layer,
                                            const std::vector<std::size_t>& in) {
    switch (layer.kind) {
        case LayerKind::Dense: {
            if (in.size() != 1) throw ValueError("dense layer expects flat input");
            return {layer.out_features};
        }
        case LayerKind::Conv2d: {
            if (in.size() != 3) throw ValueError("conv2d layer expects CxHxW input");
            if (in[1] < layer.kernel_h || in[2] < layer.kernel_w) {
                throw ValueError("conv2d kernel larger than input");
            }
            return {layer.out_channels, in[1] - layer.kernel_h + 1, in[2] - layer.kernel_w + 1};
        }
        case LayerKind::Activation: return in;
        case LayerKind::Flatten: return {shape_product(in)};
        case LayerKind::GlobalAvgPool: {
            if (in.size() != 3) throw ValueError("global-avg-pool expects CxHxW input");
            return {in[0]};
        }
    }
    throw ValueError("unknown layer kind");
}

void validate_layer_params(const LayerSpec& layer, const std::vector<std::size_t>& in) {
    if (layer.kind == LayerKind::Dense) {
        const std::vector<std::size_t> want_w = {layer.out_features, in[0]};
        if (layer.weights.shape() != want_w) {
            throw ValueError("dense weights shaped " + shape_to_string(layer.weights.shape()) +
                             ", expected " + shape_to_string(want_w));
        }
        if (layer.bias.shape() != std::vector<std::size_t>{layer.out_features}) {
            throw ValueError("dense bias length mismatch");
        }
    } else if (layer.kind == LayerKind::Conv2d) {
        const std::vector<std::size_t> want_w = {layer.out_channels, in[0], layer.kernel_h,
                                                 layer.kernel_w};
        if (layer.weights.shape() != want_w) {
            throw ValueError("conv2d weights shaped " + shape_to_string(layer.weights.shape()) +
                             ", expected " + shape_to_string(want_w));
        }
        if (layer.bias.shape() != std::vector<std::size_t>{layer.out_channels}) {
            throw ValueError("conv2d bias length mismatch");
        }
    }
}

// acts[0] is the input, acts[i+1] the output of layer i. Flat buffers only;
// shapes come from the model's precomputed per-layer shapes.
void run_forward(const std::vector<LayerSpec>& layers,
                 const std::vector<std::vector<std::size_t>>& shapes,
                 std::vector<std::vector<double>>& acts) {
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const LayerSpec& layer = layers[li];
        const auto& in_shape = shapes[li];
        const std::vector<double>& in = acts[li];
        std::vector<double>& out = acts[li + 1];
        out.assign(shape_product(shapes[li + 1]), 0.0);
        switch (layer.kind) {
            case LayerKind::Dense: {
                const std::size_t m = layer.out_features, n = in.size();
                const auto& w = layer.weights.data();
                for (std::size_t o = 0; o < m; ++o) {
                    double acc = layer.bias[o];
                    const double* row = w.data() + o * n;
                    for (std::size_t i = 0; i < n; ++i) acc += row[i] * in[i];
                    out[o] = acc;
                }
                break;
            }
            case LayerKind::Conv2d: {
                const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
                const std::size_t F = layer.out_channels, KH = layer.kernel_h, KW = layer.kernel_w;
                const std::size_t OH = H - KH + 1, OW = W - KW + 1;
                const auto& w = layer.weights.data();
                for (std::size_t f = 0; f < F; ++f) {
                    for (std::size_t y = 0; y < OH; ++y) {
                        for (std::size_t x = 0; x < OW; ++x) {
                            double acc = layer.bias[f];
                            for (std::size_t c = 0; c < C; ++c) {
                                for (std::size_t dy = 0; dy < KH; ++dy) {
                                    const double* wrow = w.data() + ((f * C + c) * KH + dy) * KW;
                                    const double* irow = in.data() + (c * H + y + dy) * W + x;
                                    for (std::size_t dx = 0; dx < KW; ++dx) acc += wrow[dx] * irow[dx];
                                }
                            }
                            out[(f * OH + y) * OW + x] = acc;
                        }
                    }
                }
                break;
            }
            case LayerKind::Activation:
                for (std::size_t i = 0; i < in.size(); ++i) {
                    out[i] = apply_activation(layer.activation, in[i]);
                }
                break;
            case LayerKind::Flatten:
                out = in;
                break;
            case LayerKind::GlobalAvgPool: {
                const std::size_t C = in_shape[0], hw = in_shape[1] * in_shape[2];
                for (std::size_t c = 0; c < C; ++c) {
                    double acc = 0.0;
                    for (std::size_t p = 0; p < hw; ++p) acc += in[c * hw + p];
                    out[c] = acc / static_cast<double>(hw);
                }
                break;
            }
        }
    }
}

struct LayerGrads {
    std::vector<double> weights;
    std::vector<double> bias;
};

// Backpropagates d(score)/d(output) through all layers. Fills grads with
// parameter gradients when non-null.
std::vector<double> run_backward(const std::vector<LayerSpec>& layers,
                                 const std::vector<std::vector<std::size_t>>& shapes,
                                 const std::vector<std::vector<double>>& acts,
                                 std::vector<double> dout, std::vector<LayerGrads>* grads) {
    for (std::size_t li = layers.size(); li-- > 0;) {
        const LayerSpec& layer = layers[li];
        const auto& in_shape = shapes[li];
        const std::vector<double>& in = acts[li];
        std::vector<double> din(in.size(), 0.0);
        switch (layer.kind) {
            case LayerKind::Dense: {
                const std::size_t m = layer.out_features, n = in.size();
                const auto& w = layer.weights.data();
                for (std::size_t o = 0; o < m; ++o) {
                    const double g = dout[o];
                    const double* row = w.data() + o * n;
                    for (std::size_t i = 0; i < n; ++i) din[i] += row[i] * g;
                }
                if (grads) {
                    auto& lg = (*grads)[li];
                    for (std::size_t o = 0; o < m; ++o) {
                        const double g = dout[o];
                        double* wrow = lg.weights.data() + o * n;
                        for (std::size_t i = 0; i < n; ++i) wrow[i] += g * in[i];
                        lg.bias[o] += g;
                    }
                }
                break;
            }
            case LayerKind::Conv2d: {
                const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
                const std::size_t F = layer.out_channels, KH = layer.kernel_h, KW = layer.kernel_w;
                const std::size_t OH = H - KH + 1, OW = W - KW + 1;
                const auto& w = layer.weights.data();
                for (std::size_t f = 0; f < F; ++f) {
                    for (std::size_t y = 0; y < OH; ++y) {
                        for (std::size_t x = 0; x < OW; ++x) {
                            const double g = dout[(f * OH + y) * OW + x];
                            if (g == 0.0) continue;
                            for (std::size_t c = 0; c < C; ++c) {
                                for (std::size_t dy = 0; dy < KH; ++dy) {
                                    const double* wrow = w.data() + ((f * C + c) * KH + dy) * KW;
                                    double* drow = din.data() + (c * H + y + dy) * W + x;
                                    for (std::size_t dx = 0; dx < KW; ++dx) drow[dx] += wrow[dx] * g;
                                }
                            }
                        }
                    }
                }
                if (grads) {
                    auto& lg = (*grads)[li];
                    for (std::size_t f = 0; f < F; ++f) {
                        for (std::size_t y = 0; y < OH; ++y) {
                            for (std::size_t x = 0; x < OW; ++x) {
                                const double g = dout[(f * OH + y) * OW + x];
                                if (g == 0.0) continue;
                                lg.bias[f] += g;
                                for (std::size_t c = 0; c < C; ++c) {
                                    for (std::size_t dy = 0; dy < KH; ++dy) {
                                        double* wrow =
                                            lg.weights.data() + ((f * C + c) * KH + dy) * KW;
                                        const double* irow = in.data() + (c * H + y + dy) * W + x;
                                        for (std::size_t dx = 0; dx < KW; ++dx) {
                                            wrow[dx] += irow[dx] * g;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                break;
            }
            case LayerKind::Activation:
                for (std::size_t i = 0; i < in.size(); ++i) {
                    din[i] = dout[i] * activation_derivative(layer.activation, in[i]);
                }
                break;
            case LayerKind::Flatten:
                din = dout;
                break;
            case LayerKind::GlobalAvgPool: {
                const std::size_t C = in_shape[0], hw = in_shape[1] * in_shape[2];
                for (std::size_t c = 0; c < C; ++c) {
                    const double g = dout[c] / static_cast<double>(hw);
                    for (std::size_t p = 0; p < hw; ++p) din[c * hw + p] = g;
                }
                break;
            }
        }
        dout = std::move(din);
    }
    return dout;
}

}  // namespace

std::string to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Activation: return "activation";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::GlobalAvgPool: return "global-avg-pool";
    }
    throw ValueError("unknown layer kind");
}

std::string to_string(ActivationKind k) {
    switch (k) {
        case ActivationKind::Relu: return "relu";
        case ActivationKind::Softplus: return "softplus";
        case ActivationKind::Tanh: return "tanh";
    }
    throw ValueError("unknown activation");
}

std::string to_string(OutputMode m) {
    switch (m) {
        case OutputMode::Logit: return "logit";
        case OutputMode::Sigmoid: return "sigmoid";
        case OutputMode::SoftmaxProb: return "softmax-prob";
    }
    throw ValueError("unknown output mode");
}

OutputMode output_mode_from_string(const std::string& s) {
    if (s == "logit") return OutputMode::Logit;
    if (s == "sigmoid") return OutputMode::Sigmoid;
    if (s == "softmax-prob") return OutputMode::SoftmaxProb;
    throw ValueError("unknown output mode '" + s + "'");
}

ActivationKind activation_from_string(const std::string& s) {
    if (s == "relu") return ActivationKind::Relu;
    if (s == "softplus") return ActivationKind::Softplus;
    if (s == "tanh") return ActivationKind::Tanh;
    throw ValueError("unknown activation '" + s + "'");
}

LayerSpec LayerSpec::dense(std::size_t out_features) {
    LayerSpec l;
    l.kind = LayerKind::Dense;
    l.out_features = out_features;
    return l;
}

LayerSpec LayerSpec::conv2d(std::size_t out_channels, std::size_t kernel_h, std::size_t kernel_w) {
    LayerSpec l;
    l.kind = LayerKind::Conv2d;
    l.out_channels = out_channels;
    l.kernel_h = kernel_h;
    l.kernel_w = kernel_w;
    return l;
}

LayerSpec LayerSpec::act(ActivationKind kind) {
    LayerSpec l;
    l.kind = LayerKind::Activation;
    l.activation = kind;
    return l;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec l;
    l.kind = LayerKind::Flatten;
    return l;
}

LayerSpec LayerSpec::global_avg_pool() {
    LayerSpec l;
    l.kind = LayerKind::GlobalAvgPool;
    return l;
}

Model::Model(std::vector<std::size_t> input_shape, std::vector<LayerSpec> layers,
             OutputMode output_mode, std::size_t class_index)
    : input_shape_(std::move(input_shape)),
      layers_(std::move(layers)),
      output_mode_(output_mode),
      class_index_(class_index) {
    if (layers_.empty()) throw ValueError("model has no layers");
    layer_out_shapes_.push_back(input_shape_);
    for (const LayerSpec& layer : layers_) {
        validate_layer_params(layer, layer_out_shapes_.back());
        layer_out_shapes_.push_back(layer_output_shape(layer, layer_out_shapes_.back()));
    }
    const auto& out = layer_out_shapes_.back();
    if (out.size() != 1) throw ValueError("model output must be a flat vector");
    output_dim_ = out[0];
    if (class_index_ >= output_dim_) throw ValueError("class_index out of range");
}

Model Model::with_class_index(std::size_t c) const {
    Model m = *this;
    if (c >= m.output_dim_) throw ValueError("class_index out of range");
    m.class_index_ = c;
    return m;
}

std::vector<double> Model::forward_logits(const Tensor& x) const {
    if (x.shape() != input_shape_) {
        throw ValueError("input shaped " + shape_to_string(x.shape()) + ", model expects " +
                         shape_to_string(input_shape_));
    }
    std::vector<std::vector<double>> acts(layers_.size() + 1);
    acts[0] = x.data();
    run_forward(layers_, layer_out_shapes_, acts);
    return acts.back();
}

namespace {
thread_local std::uint64_t g_forward_calls = 0;
}

std::uint64_t forward_call_count() { return g_forward_calls; }
void reset_forward_call_count() { g_forward_calls = 0; }

double Model::forward(const Tensor& x) const {
    ++g_forward_calls;
    const std::vector<double> z = forward_logits(x);
    switch (output_mode_) {
        case OutputMode::Logit: return z[class_index_];
        case OutputMode::Sigmoid: return sigmoid(z[class_index_]);
        case OutputMode::SoftmaxProb: return softmax(z)[class_index_];
    }
    throw ValueError("unknown output mode");
}

std::size_t Model::predict(const Tensor& x) const {
    const std::vector<double> z = forward_logits(x);
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

Tensor Model::gradient(const Tensor& x) const {
    if (x.shape() != input_shape_) {
        throw ValueError("input shaped " + shape_to_string(x.shape()) + ", model expects " +
                         shape_to_string(input_shape_));
    }
    std::vector<std::vector<double>> acts(layers_.size() + 1);
    acts[0] = x.data();
    run_forward(layers_, layer_out_shapes_, acts);
    const std::vector<double>& z = acts.back();

    std::vector<double> dz(z.size(), 0.0);
    switch (output_mode_) {
        case OutputMode::Logit:
            dz[class_index_] = 1.0;
            break;
        case OutputMode::Sigmoid: {
            const double s = sigmoid(z[class_index_]);
            dz[class_index_] = s * (1.0 - s);
            break;
        }
        case OutputMode::SoftmaxProb: {
            const std::vector<double> p = softmax(z);
            const double pc = p[class_index_];
            for (std::size_t j = 0; j < z.size(); ++j) {
                dz[j] = pc * ((j == class_index_ ? 1.0 : 0.0) - p[j]);
            }
            break;
        }
    }
    std::vector<double> din = run_backward(layers_, layer_out_shapes_, acts, std::move(dz), nullptr);
    return Tensor(input_shape_, std::move(din));
}

Tensor finite_diff_gradient(const Model& model, const Tensor& x, double h) {
    if (h <= 0.0) throw ValueError("finite difference step must be positive");
    Tensor probe = x;
    Tensor grad(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = model.forward(probe);
        probe[i] = orig - h;
        const double down = model.forward(probe);
        probe[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

namespace {

void init_parameters(std::vector<LayerSpec>& layers, const std::vector<std::size_t>& input_shape,
                     Rng& rng) {
    std::vector<std::size_t> shape = input_shape;
    for (LayerSpec& layer : layers) {
        if (layer.kind == LayerKind::Dense) {
            if (shape.size() != 1) throw ValueError("dense layer expects flat input");
            const std::size_t fan_in = shape[0], fan_out = layer.out_features;
            const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            std::vector<double> w(fan_out * fan_in);
            for (double& v : w) v = a * (2.0 * rng.next_double() - 1.0);
            layer.weights = Tensor({fan_out, fan_in}, std::move(w));
            layer.bias = Tensor({fan_out});
        } else if (layer.kind == LayerKind::Conv2d) {
            if (shape.size() != 3) throw ValueError("conv2d layer expects CxHxW input");
            const std::size_t fan_in = shape[0] * layer.kernel_h * layer.kernel_w;
            const std::size_t fan_out = layer.out_channels * layer.kernel_h * layer.kernel_w;
            const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            std::vector<double> w(layer.out_channels * shape[0] * layer.kernel_h * layer.kernel_w);
            for (double& v : w) v = a * (2.0 * rng.next_double() - 1.0);
            layer.weights =
                Tensor({layer.out_channels, shape[0], layer.kernel_h, layer.kernel_w}, std::move(w));
            layer.bias = Tensor({layer.out_channels});
        }
        shape = layer_output_shape(layer, shape);
    }
}

}  // namespace

TrainResult train_model(const std::vector<std::size_t>& input_shape,
                        std::vector<LayerSpec> architecture, const std::vector<Sample>& dataset,
                        std::size_t epochs, double learning_rate, Rng rng, OutputMode output_mode,
                        std::size_t class_index) {
    if (dataset.empty()) throw ValueError("empty training dataset");
    for (const Sample& s : dataset) {
        if (s.input.shape() != input_shape) throw ValueError("dataset input shape mismatch");
    }

    std::vector<LayerSpec> layers = std::move(architecture);
    init_parameters(layers, input_shape, rng);

    std::vector<std::vector<std::size_t>> shapes;
    shapes.push_back(input_shape);
    for (const LayerSpec& l : layers) {
        validate_layer_params(l, shapes.back());
        shapes.push_back(layer_output_shape(l, shapes.back()));
    }
    if (shapes.back().size() != 1) throw ValueError("model output must be a flat vector");
    const std::size_t out_dim = shapes.back()[0];
    for (const Sample& s : dataset) {
        if (out_dim >= 2 && s.label >= out_dim) throw ValueError("label out of range");
        if (out_dim == 1 && s.label > 1) throw ValueError("binary label must be 0 or 1");
    }

    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<LayerGrads> grads(layers.size());
    for (std::size_t li = 0; li < layers.size(); ++li) {
        grads[li].weights.resize(layers[li].weights.size());
        grads[li].bias.resize(layers[li].bias.size());
    }

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        // Fisher-Yates with the shared stream keeps the visit order seeded.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = rng.below(i);
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t si : order) {
            const Sample& sample = dataset[si];
            std::vector<std::vector<double>> acts(layers.size() + 1);
            acts[0] = sample.input.data();
            run_forward(layers, shapes, acts);
            const std::vector<double>& z = acts.back();
            for (double v : z) {
                if (!std::isfinite(v)) {
                    throw ValueError("training diverged (non-finite loss) at epoch " +
                                     std::to_string(epoch));
                }
            }

            double loss = 0.0;
            std::vector<double> dz(z.size(), 0.0);
            if (out_dim >= 2) {
                const std::vector<double> p = softmax(z);
                loss = -std::log(std::max(p[sample.label], 1e-300));
                for (std::size_t j = 0; j < z.size(); ++j) {
                    dz[j] = p[j] - (j == sample.label ? 1.0 : 0.0);
                }
            } else {
                const double y = static_cast<double>(sample.label);
                const double p = sigmoid(z[0]);
                loss = -(y * std::log(std::max(p, 1e-300)) +
                         (1.0 - y) * std::log(std::max(1.0 - p, 1e-300)));
                dz[0] = p - y;
            }
            if (!std::isfinite(loss)) {
                throw ValueError("training diverged (non-finite loss) at epoch " +
                                 std::to_string(epoch));
            }

            for (auto& lg : grads) {
                std::fill(lg.weights.begin(), lg.weights.end(), 0.0);
                std::fill(lg.bias.begin(), lg.bias.end(), 0.0);
            }
            run_backward(layers, shapes, acts, std::move(dz), &grads);

            for (std::size_t li = 0; li < layers.size(); ++li) {
                auto& w = layers[li].weights.raw();
                auto& b = layers[li].bias.raw();
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * grads[li].weights[i];
                for (std::size_t i = 0; i < b.size(); ++i) b[i] -= learning_rate * grads[li].bias[i];
            }
        }
    }

    Model model(input_shape, std::move(layers), output_mode, class_index);
    std::size_t correct = 0;
    for (const Sample& s : dataset) {
        std::size_t pred;
        if (out_dim >= 2) {
            pred = model.predict(s.input);
        } else {
            pred = model.forward_logits(s.input)[0] > 0.0 ? 1 : 0;
        }
        if (pred == s.label) ++correct;
    }
    return TrainResult{std::move(model),
                       static_cast<double>(correct) / static_cast<double>(dataset.size())};
}

namespace {

using nlohmann::json;

json field(const json& j, const char* name) {
    if (!j.contains(name)) throw IoError(std::string("checkpoint: missing field '") + name + "'");
    return j.at(name);
}

Tensor tensor_from_b64(const json& j, const char* name, const std::vector<std::size_t>& shape) {
    std::vector<double> values;
    try {
        values = base64_to_doubles(field(j, name).get<std::string>());
    } catch (const json::exception&) {
        throw IoError(std::string("checkpoint: field '") + name + "' is not a string");
    } catch (const ValueError& e) {
        throw IoError(std::string("checkpoint: field '") + name + "': " + e.what());
    }
    if (values.size() != shape_product(shape)) {
        throw IoError(std::string("checkpoint: field '") + name + "' holds " +
                      std::to_string(values.size()) + " values, declared shape needs " +
                      std::to_string(shape_product(shape)));
    }
    return Tensor(shape, std::move(values));
}

// Deterministic probe input recorded with every checkpoint.
Tensor regression_input(const std::vector<std::size_t>& shape) {
    Rng rng(0x57494721ULL);
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.next_double();
    return t;
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
    json j;
    j["format"] = "wig-checkpoint-v1";
    j["input_shape"] = model.input_shape();
    j["output_mode"] = to_string(model.output_mode());
    j["class_index"] = model.class_index();

    json jlayers = json::array();
    for (const LayerSpec& layer : model.layers()) {
        json jl;
        jl["kind"] = to_string(layer.kind);
        switch (layer.kind) {
            case LayerKind::Dense:
                jl["out_features"] = layer.out_features;
                jl["in_features"] = layer.weights.shape()[1];
                jl["weights"] = doubles_to_base64(layer.weights.data());
                jl["bias"] = doubles_to_base64(layer.bias.data());
                break;
            case LayerKind::Conv2d:
                jl["out_channels"] = layer.out_channels;
                jl["in_channels"] = layer.weights.shape()[1];
                jl["kernel_h"] = layer.kernel_h;
                jl["kernel_w"] = layer.kernel_w;
                jl["weights"] = doubles_to_base64(layer.weights.data());
                jl["bias"] = doubles_to_base64(layer.bias.data());
                break;
            case LayerKind::Activation:
                jl["activation"] = to_string(layer.activation);
                break;
            case LayerKind::Flatten:
            case LayerKind::GlobalAvgPool:
                break;
        }
        jlayers.push_back(std::move(jl));
    }
    j["layers"] = std::move(jlayers);

    const Tensor probe = regression_input(model.input_shape());
    const auto ntf = encode_ntf(probe);
    j["regression"] = {{"input_ntf", base64_encode(ntf.data(), ntf.size())},
                       {"expected_score", model.forward(probe)}};

    atomic_write(path, j.dump(2) + "\n");
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("checkpoint " + path.string() + ": " + e.what());
    }

    try {
        if (field(j, "format").get<std::string>() != "wig-checkpoint-v1") {
            throw IoError("checkpoint: unsupported format");
        }
        const auto input_shape = field(j, "input_shape").get<std::vector<std::size_t>>();
        const OutputMode mode = output_mode_from_string(field(j, "output_mode").get<std::string>());
        const std::size_t class_index = field(j, "class_index").get<std::size_t>();

        std::vector<LayerSpec> layers;
        std::vector<std::size_t> shape = input_shape;
        for (const json& jl : field(j, "layers")) {
            const std::string kind = field(jl, "kind").get<std::string>();
            LayerSpec layer;
            if (kind == "dense") {
                layer = LayerSpec::dense(field(jl, "out_features").get<std::size_t>());
                const std::size_t in_features = field(jl, "in_features").get<std::size_t>();
                layer.weights = tensor_from_b64(jl, "weights", {layer.out_features, in_features});
                layer.bias = tensor_from_b64(jl, "bias", {layer.out_features});
            } else if (kind == "conv2d") {
                layer = LayerSpec::conv2d(field(jl, "out_channels").get<std::size_t>(),
                                          field(jl, "kernel_h").get<std::size_t>(),
                                          field(jl, "kernel_w").get<std::size_t>());
                const std::size_t in_channels = field(jl, "in_channels").get<std::size_t>();
                layer.weights = tensor_from_b64(
                    jl, "weights", {layer.out_channels, in_channels, layer.kernel_h, layer.kernel_w});
                layer.bias = tensor_from_b64(jl, "bias", {layer.out_channels});
            } else if (kind == "activation") {
                layer = LayerSpec::act(activation_from_string(field(jl, "activation").get<std::string>()));
            } else if (kind == "flatten") {
                layer = LayerSpec::flatten();
            } else if (kind == "global-avg-pool") {
                layer = LayerSpec::global_avg_pool();
            } else {
                throw IoError("checkpoint: unknown layer kind '" + kind + "'");
            }
            shape = layer_output_shape(layer, shape);
            layers.push_back(std::move(layer));
        }

        Model model(input_shape, std::move(layers), mode, class_index);

        const json jr = field(j, "regression");
        const auto ntf_bytes = base64_decode(field(jr, "input_ntf").get<std::string>());
        const Tensor probe = decode_ntf(ntf_bytes);
        const double expected = field(jr, "expected_score").get<double>();
        const double got = model.forward(probe);
        if (std::abs(got - expected) > 1e-12) {
            throw IoError("checkpoint " + path.string() + ": regression score " +
                          format_double(got) + " differs from recorded " + format_double(expected));
        }
        return model;
    } catch (const json::exception& e) {
        throw IoError("checkpoint " + path.string() + ": " + e.what());
    } catch (const ValueError& e) {
        throw IoError("checkpoint " + path.string() + ": " + e.what());
    }
}

std::vector<Sample> load_dataset(const std::filesystem::path& manifest_path) {
    const auto rows = read_csv(manifest_path);
    if (rows.empty()) throw IoError("empty manifest " + manifest_path.string());
    const auto dir = manifest_path.parent_path();
    std::vector<Sample> samples;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (r == 0 && row.size() >= 2 && row[0] == "path") continue;  // header
        if (row.size() < 2) throw IoError(manifest_path.string() + ": bad row " + std::to_string(r));
        Sample s;
        s.input = read_ntf(dir / row[0]);
        try {
            s.label = static_cast<std::size_t>(std::stoul(row[1]));
        } catch (const std::exception&) {
            throw IoError(manifest_path.string() + ": bad label '" + row[1] + "'");
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace wig
