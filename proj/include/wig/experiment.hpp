#ifndef WIG_EXPERIMENT_HPP
#define WIG_EXPERIMENT_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wig/attribution.hpp"
#include "wig/evaluation.hpp"
#include "wig/fitness.hpp"
#include "wig/model.hpp"

namespace wig {

/// Method token: "ig", "eg", "wg" or "wg-filtered:<r>".
struct MethodSpec {
    AttributionMethod method = AttributionMethod::EG;
    std::size_t remove_count = 0;  // wg-filtered only
    bool filtered = false;
    std::string token;

    static MethodSpec parse(const std::string& token);
};

struct EvalOptions {
    std::vector<MethodSpec> methods;
    std::size_t n_baselines = 8;
    PathQuadrature quad{64, QuadratureRule::Trapezoid};
    std::size_t curve_points = 100;
    FitnessConfig fitness;
    bool strict_fitness = false;  // drop non-converged baselines from weighting
    std::uint64_t seed = 0;

    void validate() const;
};

struct EvalSample {
    std::string id;
    Tensor image;
    std::optional<GroundTruthMask> ground_truth;
};

struct SampleScore {
    std::string sample_id;
    std::string method;
    double deletion_auc = 0.0;
    std::optional<double> overlap_auc;
};

struct EvalOutcome {
    std::vector<SampleScore> rows;  // sample-major, method order as requested
    bool has_overlap = false;

    std::vector<double> deletion_by_method(const std::string& token) const;
    std::vector<double> overlap_by_method(const std::string& token) const;
};

/// Per-sample attribution + metrics over a dataset. Baselines are sampled
/// per sample (without replacement, excluding the sample itself) from the
/// dataset images using seeds derived per sample index; samples evaluate in
/// parallel and results keep manifest order.
EvalOutcome evaluate_dataset(const Model& model, const std::vector<EvalSample>& samples,
                             const EvalOptions& options);

/// Attribution for one input under one method, plus fitness bookkeeping for
/// the weighted variants.
struct MethodRun {
    AttributionMap attribution;
    std::vector<FitnessResult> fitness;   // wg / wg-filtered
    std::vector<double> weights;          // wg / wg-filtered (pre-filter weights)
    BaselineSet used_baselines;           // post-filter set for wg-filtered
    std::vector<AttributionMap> per_baseline;  // per-baseline IG maps (eg/wg)
};

MethodRun run_attribution_method(const Model& model, const Tensor& x, const BaselineSet& baselines,
                                 const MethodSpec& spec, const PathQuadrature& quad,
                                 const FitnessConfig& fitness, bool strict_fitness = false);

/// Summary rows in CSV order: metric, method, mean, std, relative
/// improvement vs the first method, paired-t p-value vs the first method.
/// With a single method the improvement/p-value columns are omitted.
std::vector<std::vector<std::string>> summarize_outcome(const EvalOutcome& outcome,
                                                        const std::vector<MethodSpec>& methods);

}  // namespace wig

#endif
