#ifndef WIG_ATTRIBUTION_HPP
#define WIG_ATTRIBUTION_HPP

#include <string>
#include <vector>

#include "wig/model.hpp"
#include "wig/tensor.hpp"

namespace wig {

enum class QuadratureRule { LeftRiemann, Trapezoid };

std::string to_string(QuadratureRule r);
QuadratureRule quadrature_rule_from_string(const std::string& s);

/// Discretization of the path integral: `steps` subintervals of [0,1].
/// Left-Riemann evaluates the gradient at the left node of each
/// subinterval, trapezoid at all steps+1 nodes.
struct PathQuadrature {
    std::size_t steps = 64;
    QuadratureRule rule = QuadratureRule::Trapezoid;

    void validate() const;
    // Path positions and their integration weights (weights sum to 1).
    std::vector<double> nodes() const;
    std::vector<double> node_weights() const;
};

/// Baselines x^(1)..x^(n), optionally with normalized aggregation weights.
struct BaselineSet {
    std::vector<Tensor> baselines;
    std::vector<double> weights;  // empty until assigned; else >= 0, sums to 1
    std::vector<std::string> ids; // defaults to b0..b(n-1) when empty

    std::size_t size() const { return baselines.size(); }
    std::string id_of(std::size_t k) const;
    void validate(const std::vector<std::size_t>& input_shape, bool require_weights) const;
};

enum class AttributionMethod { IG, EG, WG };

std::string to_string(AttributionMethod m);

struct AttributionMeta {
    std::size_t steps = 0;
    QuadratureRule rule = QuadratureRule::Trapezoid;
    std::vector<std::string> baseline_ids;
    std::vector<double> weights;  // empty for IG/EG
};

/// Per-pixel attribution values: channel contributions are already summed,
/// so the tensor carries the input's spatial (H×W) shape.
struct AttributionMap {
    Tensor values;
    AttributionMethod method = AttributionMethod::IG;
    AttributionMeta metadata;
};

AttributionMap integrated_gradients(const Model& model, const Tensor& x, const Tensor& baseline,
                                    const PathQuadrature& quad, const std::string& baseline_id = "b0");

AttributionMap expected_gradients(const Model& model, const Tensor& x, const BaselineSet& baselines,
                                  const PathQuadrature& quad);

AttributionMap weighted_integrated_gradients(const Model& model, const Tensor& x,
                                             const BaselineSet& baselines,
                                             const PathQuadrature& quad);

// |sum(attr) - (f(x) - f(baseline))|
double completeness_gap(const Model& model, const Tensor& x, const Tensor& baseline,
                        const AttributionMap& attr);

// |sum(attr) - (f(x) - sum_k w_k f(x^(k)))|
double generalized_completeness_gap(const Model& model, const Tensor& x,
                                    const BaselineSet& baselines, const AttributionMap& wg_attr);

/// Positive parts renormalized to a probability vector over pixels.
/// Throws ValueError("degenerate profile") when no entry is positive.
std::vector<double> normalized_positive_profile(const AttributionMap& attr);

// NTF map plus JSON sidecar describing how it was produced.
void save_attribution(const AttributionMap& attr, const std::filesystem::path& ntf_path,
                      const std::filesystem::path& sidecar_path);
AttributionMap load_attribution(const std::filesystem::path& ntf_path,
                                const std::filesystem::path& sidecar_path);

}  // namespace wig

#endif
