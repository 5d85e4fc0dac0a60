#ifndef WIG_REFERENCE_HPP
#define WIG_REFERENCE_HPP

#include "wig/attribution.hpp"
#include "wig/evaluation.hpp"
#include "wig/fitness.hpp"
#include "wig/theory.hpp"

// Plain sequential counterparts of the OpenMP kernels, written as the
// straightforward textbook loops. Kept for testing and benchmarking the
// parallel paths.
namespace wig::reference {

Tensor integrated_gradients_serial(const Model& model, const Tensor& x, const Tensor& baseline,
                                   const PathQuadrature& quad);

Tensor expected_gradients_serial(const Model& model, const Tensor& x, const BaselineSet& baselines,
                                 const PathQuadrature& quad);

Tensor weighted_integrated_gradients_serial(const Model& model, const Tensor& x,
                                            const BaselineSet& baselines,
                                            const PathQuadrature& quad);

MetricCurve deletion_curve_serial(const Model& model, const Tensor& x, const AttributionMap& attr,
                                  std::size_t n_points, const NeutralPolicy& neutral);

std::vector<double> empirical_relevance_fraction_serial(const std::vector<double>& profile,
                                                        const std::vector<bool>& relevant,
                                                        const SamplingPlan& plan, const Rng& rng);

}  // namespace wig::reference

#endif
