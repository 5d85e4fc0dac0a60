#ifndef WIG_THEORY_HPP
#define WIG_THEORY_HPP

#include <cstddef>
#include <vector>

#include "wig/tensor.hpp"

namespace wig {

/// Synthetic world for the probabilistic relevance model: n baseline
/// profiles over d features, ordered by ascending fitness d_alpha with
/// non-increasing relevance mass Q_k on the relevant set.
struct RelevanceWorld {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<std::vector<double>> profiles;  // n probability vectors over d
    std::vector<bool> relevant;                 // membership mask of R
    std::vector<std::size_t> d_alphas;          // ascending positive integers
    std::vector<double> q_values;               // Q_k = mass of profile k on R

    std::size_t relevant_size() const;
    // Verifies the probability and ordering invariants (tolerance 1e-12).
    void validate() const;
    bool assumption_holds() const;
};

struct SamplingPlan {
    std::size_t m = 100;        // feature draws per trial
    std::size_t trials = 10000; // Monte Carlo repetitions
    double delta = 0.05;        // confidence parameter

    void validate() const;
};

/// Draws a world satisfying the fitness-relevance ordering by construction.
/// spread controls how far the Q values may differ; spread=0 makes them all
/// equal.
RelevanceWorld generate_world(std::size_t n, std::size_t d, double relevant_fraction, double spread,
                              Rng& rng);

/// Same construction with the Q ordering inverted, so better fitness gets
/// LOWER relevance — used to confirm the checkers notice violations.
RelevanceWorld generate_adversarial_world(std::size_t n, std::size_t d, double relevant_fraction,
                                          double spread, Rng& rng);

/// sum_k weights_k * q_k via stable_sum.
double expected_relevance(const std::vector<double>& weights, const std::vector<double>& q_values);

struct Proposition1Report {
    double wg_value = 0.0;
    double eg_value = 0.0;
    bool holds = false;
    bool strict = false;
    bool q_all_equal = false;
    bool assumption_violated = false;
};

/// Compares fitness-weighted vs uniform expected relevance on one world.
Proposition1Report check_proposition1(const RelevanceWorld& world);

/// Per trial: m i.i.d. feature draws from the profile; returns the fraction
/// landing in the relevant set, one value per trial. Trial t uses the
/// generator derived from (rng seed, t), so results do not depend on
/// execution order.
std::vector<double> empirical_relevance_fraction(const std::vector<double>& profile,
                                                 const std::vector<bool>& relevant,
                                                 const SamplingPlan& plan, const Rng& rng);

struct Theorem1Report {
    bool skipped = false;       // delta_x <= 0 makes the bound vacuous
    double q_wg = 0.0;
    double q_eg = 0.0;
    double delta_x = 0.0;
    double empirical_failure_rate = 0.0;
    double hoeffding_bound = 0.0;
    double slack = 0.0;         // 3 binomial standard errors on the bound
    bool holds = false;
    std::size_t m_star = 0;     // ceil(log(1/delta) / (2 delta_x^2))
};

/// Simulates Pr(q_hat_WG <= q_EG) with m samples per trial and checks it
/// against exp(-2 m delta_x^2) plus Monte Carlo slack.
Theorem1Report check_theorem1(const std::vector<bool>& relevant, const SamplingPlan& plan,
                              const std::vector<double>& wg_profile,
                              const std::vector<double>& eg_profile, const Rng& rng);

// Weighted and uniform mixtures of the world's profiles.
std::vector<double> mixture_profile(const RelevanceWorld& world, const std::vector<double>& weights);
std::vector<double> uniform_mixture_profile(const RelevanceWorld& world);

}  // namespace wig

#endif
