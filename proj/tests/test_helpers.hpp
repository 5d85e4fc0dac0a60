#ifndef WIG_TEST_HELPERS_HPP
#define WIG_TEST_HELPERS_HPP

#include <vector>

#include "wig/model.hpp"
#include "wig/tensor.hpp"

namespace wig_test {

// Small dense model with randomized weights in a bounded range, away from
// any activation saturation.
inline wig::Model random_mlp(wig::Rng& rng, std::size_t in_dim, std::size_t hidden,
                             std::size_t out_dim, wig::ActivationKind act,
                             wig::OutputMode mode = wig::OutputMode::SoftmaxProb,
                             std::size_t class_index = 0) {
    using namespace wig;
    auto rand_tensor = [&](std::vector<std::size_t> shape, double scale) {
        Tensor t(shape);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * (2.0 * rng.next_double() - 1.0);
        return t;
    };
    LayerSpec l1 = LayerSpec::dense(hidden);
    l1.weights = rand_tensor({hidden, in_dim}, 1.0);
    l1.bias = rand_tensor({hidden}, 0.5);
    LayerSpec l2 = LayerSpec::act(act);
    LayerSpec l3 = LayerSpec::dense(out_dim);
    l3.weights = rand_tensor({out_dim, hidden}, 1.0);
    l3.bias = rand_tensor({out_dim}, 0.5);
    return Model({in_dim}, {l1, l2, l3}, mode, class_index);
}

// Linear scorer in logit mode: f(x) = w.x + b.
inline wig::Model linear_model(const std::vector<double>& w, double b) {
    using namespace wig;
    LayerSpec l = LayerSpec::dense(1);
    l.weights = Tensor({1, w.size()}, w);
    l.bias = Tensor({1}, {b});
    return Model({w.size()}, {l}, OutputMode::Logit, 0);
}

// Sum of all pixels (logit mode), any C×H×W or flat input shape.
inline wig::Model sum_model(const std::vector<std::size_t>& input_shape) {
    using namespace wig;
    const std::size_t d = shape_product(input_shape);
    std::vector<LayerSpec> layers;
    if (input_shape.size() > 1) layers.push_back(LayerSpec::flatten());
    LayerSpec l = LayerSpec::dense(1);
    l.weights = Tensor({1, d}, std::vector<double>(d, 1.0));
    l.bias = Tensor({1}, {0.0});
    layers.push_back(l);
    return Model(input_shape, layers, OutputMode::Logit, 0);
}

inline wig::Tensor random_tensor(wig::Rng& rng, std::vector<std::size_t> shape, double lo = -1.0,
                                 double hi = 1.0) {
    wig::Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * rng.next_double();
    return t;
}

}  // namespace wig_test

#endif
