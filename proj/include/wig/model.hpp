#ifndef WIG_MODEL_HPP
#define WIG_MODEL_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "wig/tensor.hpp"

namespace wig {

enum class LayerKind { Dense, Conv2d, Activation, Flatten, GlobalAvgPool };
enum class ActivationKind { Relu, Softplus, Tanh };
enum class OutputMode { Logit, Sigmoid, SoftmaxProb };

std::string to_string(LayerKind k);
std::string to_string(ActivationKind k);
std::string to_string(OutputMode m);
OutputMode output_mode_from_string(const std::string& s);
ActivationKind activation_from_string(const std::string& s);

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    ActivationKind activation = ActivationKind::Relu;  // Activation layers only
    std::size_t out_features = 0;                      // Dense
    std::size_t out_channels = 0;                      // Conv2d
    std::size_t kernel_h = 0, kernel_w = 0;            // Conv2d, stride 1, valid padding
    Tensor weights;                                    // Dense: {out,in}; Conv2d: {F,C,kh,kw}
    Tensor bias;                                       // Dense: {out}; Conv2d: {F}

    static LayerSpec dense(std::size_t out_features);
    static LayerSpec conv2d(std::size_t out_channels, std::size_t kernel_h, std::size_t kernel_w);
    static LayerSpec act(ActivationKind kind);
    static LayerSpec flatten();
    static LayerSpec global_avg_pool();
};

/// Labeled sample for the trainer.
struct Sample {
    Tensor input;
    std::size_t label = 0;
};

/// Differentiable scorer f: R^d -> R. The scalar score is the class_index
/// entry of the final layer output, mapped through output_mode. Immutable
/// after construction; forward and gradient are pure.
class Model {
public:
    Model() = default;
    Model(std::vector<std::size_t> input_shape, std::vector<LayerSpec> layers,
          OutputMode output_mode, std::size_t class_index);

    const std::vector<std::size_t>& input_shape() const { return input_shape_; }
    const std::vector<LayerSpec>& layers() const { return layers_; }
    OutputMode output_mode() const { return output_mode_; }
    std::size_t class_index() const { return class_index_; }
    std::size_t output_dim() const { return output_dim_; }

    Model with_class_index(std::size_t c) const;

    // Scalar score f_c(x) under the configured output mode.
    double forward(const Tensor& x) const;

    // Raw final-layer output vector.
    std::vector<double> forward_logits(const Tensor& x) const;

    std::size_t predict(const Tensor& x) const;

    // Analytic reverse-mode gradient of forward() with respect to x.
    Tensor gradient(const Tensor& x) const;

private:
    friend struct TrainerAccess;

    std::vector<std::size_t> input_shape_;
    std::vector<LayerSpec> layers_;
    OutputMode output_mode_ = OutputMode::SoftmaxProb;
    std::size_t class_index_ = 0;
    std::size_t output_dim_ = 0;
    std::vector<std::vector<std::size_t>> layer_out_shapes_;
};

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per scalar entry.
Tensor finite_diff_gradient(const Model& model, const Tensor& x, double h);

struct TrainResult {
    Model model;
    double accuracy = 0.0;
};

/// Plain SGD with cross-entropy loss, fixed seed, fixed visit order.
/// Deterministic given identical inputs. Throws ValueError with the epoch
/// index if the loss goes non-finite.
TrainResult train_model(const std::vector<std::size_t>& input_shape,
                        std::vector<LayerSpec> architecture, const std::vector<Sample>& dataset,
                        std::size_t epochs, double learning_rate, Rng rng,
                        OutputMode output_mode = OutputMode::SoftmaxProb,
                        std::size_t class_index = 0);

// Checkpoint JSON with base64 weights and one recorded regression pair.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

// Dataset directory: NTF tensors plus a manifest.csv of `path,label` rows.
std::vector<Sample> load_dataset(const std::filesystem::path& manifest_path);

// Per-thread counter of Model::forward invocations, for call-budget checks.
std::uint64_t forward_call_count();
void reset_forward_call_count();

}  // namespace wig

#endif
