#include "wig/reference.hpp"

#include <cmath>

#include "wig/error.hpp"

namespace wig::reference {

Tensor integrated_gradients_serial(const Model& model, const Tensor& x, const Tensor& baseline,
                                   const PathQuadrature& quad) {
    if (!x.same_shape(baseline)) throw ValueError("baseline shape mismatch");
    const std::vector<double> alphas = quad.nodes();
    const std::vector<double> weights = quad.node_weights();
    const std::size_t d = x.size();

    std::vector<double> integral(d, 0.0);
    Tensor point = baseline;
    for (std::size_t t = 0; t < alphas.size(); ++t) {
        for (std::size_t i = 0; i < d; ++i) {
            point[i] = baseline[i] + alphas[t] * (x[i] - baseline[i]);
        }
        const Tensor grad = model.gradient(point);
        for (std::size_t i = 0; i < d; ++i) integral[i] += weights[t] * grad[i];
    }

    const std::size_t channels = channel_count(x.shape());
    const std::size_t pixels = pixel_count(x.shape());
    Tensor out(spatial_shape(x.shape()));
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t p = 0; p < pixels; ++p) {
            const std::size_t i = c * pixels + p;
            out[p] += (x[i] - baseline[i]) * integral[i];
        }
    }
    return out;
}

Tensor expected_gradients_serial(const Model& model, const Tensor& x, const BaselineSet& baselines,
                                 const PathQuadrature& quad) {
    baselines.validate(x.shape(), false);
    Tensor acc(spatial_shape(x.shape()));
    for (const Tensor& b : baselines.baselines) {
        const Tensor map = integrated_gradients_serial(model, x, b, quad);
        for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += map[p];
    }
    const double inv_n = 1.0 / static_cast<double>(baselines.size());
    for (std::size_t p = 0; p < acc.size(); ++p) acc[p] *= inv_n;
    return acc;
}

Tensor weighted_integrated_gradients_serial(const Model& model, const Tensor& x,
                                            const BaselineSet& baselines,
                                            const PathQuadrature& quad) {
    baselines.validate(x.shape(), true);
    Tensor acc(spatial_shape(x.shape()));
    for (std::size_t k = 0; k < baselines.size(); ++k) {
        const Tensor map = integrated_gradients_serial(model, x, baselines.baselines[k], quad);
        for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += baselines.weights[k] * map[p];
    }
    return acc;
}

MetricCurve deletion_curve_serial(const Model& model, const Tensor& x, const AttributionMap& attr,
                                  std::size_t n_points, const NeutralPolicy& neutral) {
    if (n_points < 1) throw ValueError("curve needs at least one point");
    const std::size_t pixels = pixel_count(x.shape());
    const auto order = argsort_desc(attr.values.data());
    const std::size_t channels = channel_count(x.shape());

    MetricCurve curve;
    double total = 0.0;
    for (std::size_t i = 0; i < n_points; ++i) {
        const double p = static_cast<double>(i + 1) / static_cast<double>(n_points);
        const std::size_t k = static_cast<std::size_t>(std::floor(p * static_cast<double>(pixels) + 0.5));
        Tensor masked = x;
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t c = 0; c < channels; ++c) {
                masked[scalar_index(x.shape(), c, order[r])] = neutral.value_for_channel(c);
            }
        }
        const double score = model.forward(masked);
        curve.fractions.push_back(p);
        curve.values.push_back(score);
        total += score;
    }
    curve.auc = total / static_cast<double>(n_points);
    return curve;
}

std::vector<double> empirical_relevance_fraction_serial(const std::vector<double>& profile,
                                                        const std::vector<bool>& relevant,
                                                        const SamplingPlan& plan, const Rng& rng) {
    plan.validate();
    std::vector<double> cdf(profile.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < profile.size(); ++j) {
        acc += profile[j];
        cdf[j] = acc;
    }

    std::vector<double> fractions;
    fractions.reserve(plan.trials);
    for (std::size_t t = 0; t < plan.trials; ++t) {
        Rng trial_rng = rng.derive(t);
        std::size_t in_r = 0;
        for (std::size_t s = 0; s < plan.m; ++s) {
            const double u = trial_rng.next_double() * cdf.back();
            std::size_t j = 0;
            while (j + 1 < cdf.size() && cdf[j] <= u) ++j;
            if (relevant[j]) ++in_r;
        }
        fractions.push_back(static_cast<double>(in_r) / static_cast<double>(plan.m));
    }
    return fractions;
}

}  // namespace wig::reference
