#ifndef WIG_FITNESS_HPP
#define WIG_FITNESS_HPP

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "wig/attribution.hpp"
#include "wig/model.hpp"
#include "wig/tensor.hpp"

namespace wig {

/// Replacement value for masked pixels: one constant for every channel, or
/// one value per channel (e.g. a dataset mean).
struct NeutralPolicy {
    enum class Kind { Constant, PerChannel } kind = Kind::Constant;
    double constant = 0.0;
    std::vector<double> channel_values;

    static NeutralPolicy constant_value(double v);
    static NeutralPolicy per_channel(std::vector<double> values);
    // Per-channel mean over every pixel of every image.
    static NeutralPolicy dataset_mean(const std::vector<Tensor>& images);
    double value_for_channel(std::size_t c) const;
};

struct FitnessConfig {
    double alpha = 0.5;
    NeutralPolicy neutral;
    double epsilon = 0.01;
    std::size_t max_iterations = 100;

    void validate() const;
};

/// Pixel selection over the spatial grid.
struct Mask {
    std::vector<bool> selected;  // one flag per pixel
    std::size_t size = 0;        // number of true entries
};

struct FitnessResult {
    std::size_t d_alpha = 0;
    bool converged = false;
    double final_score = 0.0;
    std::size_t iterations_used = 0;
};

/// Mask selecting the k pixels with largest attribution, ties broken by
/// ascending pixel index.
Mask find_mask(const AttributionMap& attr, std::size_t k);

/// Copy of x with every channel of each selected pixel replaced by the
/// neutral value.
Tensor apply_mask(const Tensor& x, const Mask& mask, const NeutralPolicy& neutral);

/// Binary search for the minimal number of masked pixels that brings the
/// score to alpha*f(x), within epsilon. When base_score is provided it is
/// used as f(x) and the search spends model evaluations only on probes.
FitnessResult compute_d_alpha(const Model& model, const Tensor& x, const AttributionMap& attr,
                              const FitnessConfig& cfg,
                              std::optional<double> base_score = std::nullopt);

/// Linear scan k = 0,1,2,...: first k whose score lands within epsilon of
/// the target; failing that, the smallest k whose score falls below the
/// target. Deliberately O(d) — the correctness reference for the search.
FitnessResult compute_d_alpha_oracle(const Model& model, const Tensor& x,
                                     const AttributionMap& attr, const FitnessConfig& cfg,
                                     std::optional<double> base_score = std::nullopt);

/// w_k = (1/max(d_k,1)) / sum_j (1/max(d_j,1)); non-negative, sums to 1.
/// Strict mode zeroes the weight of non-converged results and renormalizes
/// over the rest; by default they keep the weight of their returned d_alpha.
std::vector<double> fitness_weights(const std::vector<FitnessResult>& results,
                                    bool strict_exclude_nonconverged = false);

/// Drops the remove_count baselines with largest d_alpha (ties: higher
/// original index goes first) and reweights the survivors.
BaselineSet filter_baselines(const BaselineSet& baselines,
                             const std::vector<FitnessResult>& results, std::size_t remove_count);
// Original indices kept by the same filtering rule, in ascending order.
std::vector<std::size_t> surviving_indices(const std::vector<FitnessResult>& results,
                                           std::size_t remove_count);

// CSV: baseline_id,d_alpha,converged,final_score,iterations,weight
void write_fitness_report(const std::filesystem::path& path, const BaselineSet& baselines,
                          const std::vector<FitnessResult>& results,
                          const std::vector<double>& weights);

}  // namespace wig

#endif
