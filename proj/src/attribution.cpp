#include "wig/attribution.hpp"

#include <cmath>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "wig/error.hpp"
#include "wig/io.hpp"
#include "wig/parallel.hpp"

namespace wig {

std::string to_string(QuadratureRule r) {
    switch (r) {
        case QuadratureRule::LeftRiemann: return "left-riemann";
        case QuadratureRule::Trapezoid: return "trapezoid";
    }
    throw ValueError("unknown quadrature rule");
}

QuadratureRule quadrature_rule_from_string(const std::string& s) {
    if (s == "left-riemann") return QuadratureRule::LeftRiemann;
    if (s == "trapezoid") return QuadratureRule::Trapezoid;
    throw ValueError("unknown quadrature rule '" + s + "'");
}

void PathQuadrature::validate() const {
    if (steps < 1) throw ValueError("quadrature needs at least one step");
}

std::vector<double> PathQuadrature::nodes() const {
    validate();
    const std::size_t count = rule == QuadratureRule::Trapezoid ? steps + 1 : steps;
    std::vector<double> alphas(count);
    for (std::size_t t = 0; t < count; ++t) {
        alphas[t] = static_cast<double>(t) / static_cast<double>(steps);
    }
    return alphas;
}

std::vector<double> PathQuadrature::node_weights() const {
    validate();
    const double h = 1.0 / static_cast<double>(steps);
    if (rule == QuadratureRule::LeftRiemann) {
        return std::vector<double>(steps, h);
    }
    std::vector<double> w(steps + 1, h);
    w.front() = 0.5 * h;
    w.back() = 0.5 * h;
    return w;
}

std::string BaselineSet::id_of(std::size_t k) const {
    if (k < ids.size()) return ids[k];
    return "b" + std::to_string(k);
}

void BaselineSet::validate(const std::vector<std::size_t>& input_shape, bool require_weights) const {
    if (baselines.empty()) throw ValueError("baseline set is empty");
    for (const Tensor& b : baselines) {
        if (b.shape() != input_shape) {
            throw ValueError("baseline shaped " + shape_to_string(b.shape()) +
                             ", expected " + shape_to_string(input_shape));
        }
    }
    if (require_weights || !weights.empty()) {
        if (weights.size() != baselines.size()) {
            throw ValueError(require_weights && weights.empty()
                                 ? "baseline weights missing"
                                 : "baseline weight count mismatch");
        }
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw ValueError("negative baseline weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw ValueError("baseline weights sum to " + format_double(total) + ", expected 1");
        }
    }
}

std::string to_string(AttributionMethod m) {
    switch (m) {
        case AttributionMethod::IG: return "IG";
        case AttributionMethod::EG: return "EG";
        case AttributionMethod::WG: return "WG";
    }
    throw ValueError("unknown attribution method");
}

namespace {

// Channel sums of per-scalar attributions, laid out on the spatial shape.
Tensor reduce_channels(const std::vector<double>& scalar_attr,
                       const std::vector<std::size_t>& input_shape) {
    const std::size_t channels = channel_count(input_shape);
    const std::size_t pixels = pixel_count(input_shape);
    std::vector<double> per_pixel(pixels, 0.0);
    for (std::size_t p = 0; p < pixels; ++p) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) acc += scalar_attr[c * pixels + p];
        per_pixel[p] = acc;
    }
    return Tensor(spatial_shape(input_shape), std::move(per_pixel));
}

// Core IG kernel. Gradients at the quadrature nodes are independent; nodes
// are split into a fixed number of chunks, each accumulated in node order
// with compensation, and the per-chunk partials combine in chunk order.
// The chunking does not depend on the thread count, so results are
// bit-identical however many threads run.
std::vector<double> ig_scalar_attributions(const Model& model, const Tensor& x,
                                           const Tensor& baseline, const PathQuadrature& quad) {
    if (x.shape() != model.input_shape()) {
        throw ValueError("input shaped " + shape_to_string(x.shape()) + ", model expects " +
                         shape_to_string(model.input_shape()));
    }
    if (!x.same_shape(baseline)) {
        throw ValueError("baseline shaped " + shape_to_string(baseline.shape()) +
                         ", input is " + shape_to_string(x.shape()));
    }
    const std::vector<double> alphas = quad.nodes();
    const std::vector<double> weights = quad.node_weights();
    const std::size_t n_nodes = alphas.size();
    const std::size_t d = x.size();

    const std::size_t n_chunks = std::min<std::size_t>(n_nodes, 16);
    std::vector<std::vector<double>> chunk_totals(n_chunks);
    detail::parallel_for(n_chunks, [&](std::size_t c) {
        const std::size_t begin = c * n_nodes / n_chunks;
        const std::size_t end = (c + 1) * n_nodes / n_chunks;
        std::vector<double> sum(d, 0.0);
        std::vector<double> comp(d, 0.0);
        Tensor point = baseline;
        for (std::size_t t = begin; t < end; ++t) {
            const double a = alphas[t];
            for (std::size_t i = 0; i < d; ++i) point[i] = baseline[i] + a * (x[i] - baseline[i]);
            const Tensor grad = model.gradient(point);
            for (std::size_t i = 0; i < d; ++i) {
                const double term = weights[t] * grad[i];
                const double s = sum[i] + term;
                if (std::abs(sum[i]) >= std::abs(term)) {
                    comp[i] += (sum[i] - s) + term;
                } else {
                    comp[i] += (term - s) + sum[i];
                }
                sum[i] = s;
            }
        }
        for (std::size_t i = 0; i < d; ++i) sum[i] += comp[i];
        chunk_totals[c] = std::move(sum);
    });

    std::vector<double> attr(d);
    for (std::size_t i = 0; i < d; ++i) {
        double integral = 0.0;
        double comp = 0.0;
        for (std::size_t c = 0; c < n_chunks; ++c) {
            const double term = chunk_totals[c][i];
            const double s = integral + term;
            if (std::abs(integral) >= std::abs(term)) {
                comp += (integral - s) + term;
            } else {
                comp += (term - s) + integral;
            }
            integral = s;
        }
        attr[i] = (x[i] - baseline[i]) * (integral + comp);
    }
    return attr;
}

std::vector<Tensor> per_baseline_maps(const Model& model, const Tensor& x,
                                      const BaselineSet& baselines, const PathQuadrature& quad) {
    const std::size_t n = baselines.size();
    std::vector<Tensor> maps(n);
    detail::parallel_for(n, [&](std::size_t k) {
        const auto scalar = ig_scalar_attributions(model, x, baselines.baselines[k], quad);
        maps[k] = reduce_channels(scalar, x.shape());
    });
    return maps;
}

// sum_k coeff_k * maps[k] per pixel via stable_sum in baseline order.
Tensor combine_maps(const std::vector<Tensor>& maps, const std::vector<double>& coeffs) {
    const std::size_t pixels = maps.front().size();
    const std::size_t n = maps.size();
    std::vector<double> out(pixels);
    std::vector<double> terms(n);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t k = 0; k < n; ++k) terms[k] = coeffs[k] * maps[k][p];
        out[p] = stable_sum(terms);
    }
    return Tensor(maps.front().shape(), std::move(out));
}

}  // namespace

AttributionMap integrated_gradients(const Model& model, const Tensor& x, const Tensor& baseline,
                                    const PathQuadrature& quad, const std::string& baseline_id) {
    AttributionMap map;
    map.values = reduce_channels(ig_scalar_attributions(model, x, baseline, quad), x.shape());
    map.method = AttributionMethod::IG;
    map.metadata.steps = quad.steps;
    map.metadata.rule = quad.rule;
    map.metadata.baseline_ids = {baseline_id};
    return map;
}

AttributionMap expected_gradients(const Model& model, const Tensor& x, const BaselineSet& baselines,
                                  const PathQuadrature& quad) {
    baselines.validate(x.shape(), false);
    const std::vector<Tensor> maps = per_baseline_maps(model, x, baselines, quad);
    const double u = 1.0 / static_cast<double>(baselines.size());
    const std::vector<double> uniform(baselines.size(), u);

    AttributionMap map;
    map.values = combine_maps(maps, uniform);
    map.method = AttributionMethod::EG;
    map.metadata.steps = quad.steps;
    map.metadata.rule = quad.rule;
    for (std::size_t k = 0; k < baselines.size(); ++k) {
        map.metadata.baseline_ids.push_back(baselines.id_of(k));
    }
    return map;
}

AttributionMap weighted_integrated_gradients(const Model& model, const Tensor& x,
                                             const BaselineSet& baselines,
                                             const PathQuadrature& quad) {
    baselines.validate(x.shape(), true);
    const std::vector<Tensor> maps = per_baseline_maps(model, x, baselines, quad);

    AttributionMap map;
    map.values = combine_maps(maps, baselines.weights);
    map.method = AttributionMethod::WG;
    map.metadata.steps = quad.steps;
    map.metadata.rule = quad.rule;
    map.metadata.weights = baselines.weights;
    for (std::size_t k = 0; k < baselines.size(); ++k) {
        map.metadata.baseline_ids.push_back(baselines.id_of(k));
    }
    return map;
}

double completeness_gap(const Model& model, const Tensor& x, const Tensor& baseline,
                        const AttributionMap& attr) {
    const double total = stable_sum(attr.values.data());
    return std::abs(total - (model.forward(x) - model.forward(baseline)));
}

double generalized_completeness_gap(const Model& model, const Tensor& x,
                                    const BaselineSet& baselines, const AttributionMap& wg_attr) {
    baselines.validate(x.shape(), true);
    const double total = stable_sum(wg_attr.values.data());
    std::vector<double> terms(baselines.size());
    for (std::size_t k = 0; k < baselines.size(); ++k) {
        terms[k] = baselines.weights[k] * model.forward(baselines.baselines[k]);
    }
    return std::abs(total - (model.forward(x) - stable_sum(terms)));
}

std::vector<double> normalized_positive_profile(const AttributionMap& attr) {
    const auto& v = attr.values.data();
    std::vector<double> clipped(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) clipped[i] = v[i] > 0.0 ? v[i] : 0.0;
    const double total = stable_sum(clipped);
    if (total <= 0.0) throw ValueError("degenerate profile");
    for (double& p : clipped) p /= total;
    return clipped;
}

void save_attribution(const AttributionMap& attr, const std::filesystem::path& ntf_path,
                      const std::filesystem::path& sidecar_path) {
    write_ntf(ntf_path, attr.values);
    nlohmann::json j;
    j["method"] = to_string(attr.method);
    j["steps"] = attr.metadata.steps;
    j["rule"] = to_string(attr.metadata.rule);
    j["baseline_ids"] = attr.metadata.baseline_ids;
    if (!attr.metadata.weights.empty()) j["weights"] = attr.metadata.weights;
    atomic_write(sidecar_path, j.dump(2) + "\n");
}

AttributionMap load_attribution(const std::filesystem::path& ntf_path,
                                const std::filesystem::path& sidecar_path) {
    AttributionMap attr;
    attr.values = read_ntf(ntf_path);
    std::ifstream in(sidecar_path);
    if (!in) throw IoError("cannot open " + sidecar_path.string());
    nlohmann::json j;
    try {
        in >> j;
        const std::string m = j.at("method").get<std::string>();
        if (m == "IG") attr.method = AttributionMethod::IG;
        else if (m == "EG") attr.method = AttributionMethod::EG;
        else if (m == "WG") attr.method = AttributionMethod::WG;
        else throw IoError("sidecar: unknown method '" + m + "'");
        attr.metadata.steps = j.at("steps").get<std::size_t>();
        attr.metadata.rule = quadrature_rule_from_string(j.at("rule").get<std::string>());
        attr.metadata.baseline_ids = j.at("baseline_ids").get<std::vector<std::string>>();
        if (j.contains("weights")) attr.metadata.weights = j.at("weights").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("sidecar " + sidecar_path.string() + ": " + e.what());
    }
    return attr;
}

}  // namespace wig
