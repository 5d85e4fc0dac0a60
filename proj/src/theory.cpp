#include "wig/theory.hpp"

#include <algorithm>
#include <cmath>

#include "wig/error.hpp"
#include "wig/fitness.hpp"
#include "wig/parallel.hpp"

namespace wig {

std::size_t RelevanceWorld::relevant_size() const {
    std::size_t r = 0;
    for (bool b : relevant) r += b ? 1 : 0;
    return r;
}

void RelevanceWorld::validate() const {
    if (n < 1 || d < 2) throw ValueError("world needs n >= 1 and d >= 2");
    if (profiles.size() != n || d_alphas.size() != n || q_values.size() != n) {
        throw ValueError("world field sizes disagree with n");
    }
    if (relevant.size() != d) throw ValueError("relevant mask size mismatch");
    const std::size_t r = relevant_size();
    if (r == 0 || r == d) throw ValueError("relevant set must be a proper nonempty subset");
    for (std::size_t k = 0; k < n; ++k) {
        if (profiles[k].size() != d) throw ValueError("profile size mismatch");
        double total = 0.0;
        double on_r = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double p = profiles[k][j];
            if (!(p >= 0.0)) throw ValueError("negative profile mass");
            total += p;
            if (relevant[j]) on_r += p;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ValueError("profile does not sum to 1");
        if (std::abs(on_r - q_values[k]) > 1e-12) throw ValueError("stored Q disagrees with profile");
        if (d_alphas[k] == 0) throw ValueError("d_alpha must be positive");
        if (k > 0 && d_alphas[k] < d_alphas[k - 1]) throw ValueError("d_alphas not ascending");
    }
}

bool RelevanceWorld::assumption_holds() const {
    for (std::size_t k = 1; k < n; ++k) {
        if (q_values[k] > q_values[k - 1] + 1e-12) return false;
    }
    return true;
}

void SamplingPlan::validate() const {
    if (m < 1) throw ValueError("plan needs m >= 1");
    if (trials < 1) throw ValueError("plan needs trials >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ValueError("delta must lie in (0,1)");
}

namespace {

// Random positive masses over the index set, scaled to the given total.
void fill_mass(std::vector<double>& profile, const std::vector<std::size_t>& indices, double total,
               Rng& rng) {
    std::vector<double> raw(indices.size());
    double sum = 0.0;
    for (double& v : raw) {
        v = 0.5 + rng.next_double();
        sum += v;
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
        profile[indices[i]] = total * raw[i] / sum;
    }
}

RelevanceWorld build_world(std::size_t n, std::size_t d, double relevant_fraction, double spread,
                           Rng& rng, bool adversarial) {
    if (n < 2 || d < 2) throw ValueError("world generation needs n >= 2 and d >= 2");
    if (!(relevant_fraction > 0.0 && relevant_fraction < 1.0)) {
        throw ValueError("relevant_fraction must lie in (0,1)");
    }
    if (spread < 0.0) throw ValueError("spread must be non-negative");

    RelevanceWorld world;
    world.n = n;
    world.d = d;

    std::size_t r = static_cast<std::size_t>(std::llround(relevant_fraction * static_cast<double>(d)));
    r = std::min<std::size_t>(std::max<std::size_t>(r, 1), d - 1);

    std::vector<std::size_t> order(d);
    for (std::size_t i = 0; i < d; ++i) order[i] = i;
    for (std::size_t i = d; i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    world.relevant.assign(d, false);
    std::vector<std::size_t> in_r(order.begin(), order.begin() + r);
    std::vector<std::size_t> out_r(order.begin() + r, order.end());
    for (std::size_t j : in_r) world.relevant[j] = true;

    // Q values centered at 0.5, dispersed by spread, sorted to match the
    // fitness ordering (descending normally, ascending for adversarial
    // worlds so the assumption is violated).
    std::vector<double> q(n);
    for (double& v : q) {
        const double raw = 0.5 + spread * (2.0 * rng.next_double() - 1.0);
        v = std::clamp(raw, 0.02, 0.98);
    }
    std::sort(q.begin(), q.end());
    if (!adversarial) std::reverse(q.begin(), q.end());

    world.d_alphas.resize(n);
    std::size_t da = 1 + rng.below(3);
    for (std::size_t k = 0; k < n; ++k) {
        world.d_alphas[k] = da;
        da += 1 + rng.below(4);
    }

    world.profiles.assign(n, std::vector<double>(d, 0.0));
    world.q_values.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        fill_mass(world.profiles[k], in_r, q[k], rng);
        fill_mass(world.profiles[k], out_r, 1.0 - q[k], rng);
        // Store the realized mass so the invariant is exact.
        double on_r = 0.0;
        for (std::size_t j : in_r) on_r += world.profiles[k][j];
        world.q_values[k] = on_r;
    }
    return world;
}

}  // namespace

RelevanceWorld generate_world(std::size_t n, std::size_t d, double relevant_fraction, double spread,
                              Rng& rng) {
    RelevanceWorld world = build_world(n, d, relevant_fraction, spread, rng, false);
    world.validate();
    return world;
}

RelevanceWorld generate_adversarial_world(std::size_t n, std::size_t d, double relevant_fraction,
                                          double spread, Rng& rng) {
    RelevanceWorld world = build_world(n, d, relevant_fraction, spread, rng, true);
    world.validate();
    return world;
}

double expected_relevance(const std::vector<double>& weights, const std::vector<double>& q_values) {
    if (weights.size() != q_values.size()) throw ValueError("weight/Q length mismatch");
    std::vector<double> terms(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k) terms[k] = weights[k] * q_values[k];
    return stable_sum(terms);
}

Proposition1Report check_proposition1(const RelevanceWorld& world) {
    std::vector<FitnessResult> results(world.n);
    for (std::size_t k = 0; k < world.n; ++k) results[k].d_alpha = world.d_alphas[k];
    const std::vector<double> w = fitness_weights(results);
    const std::vector<double> u(world.n, 1.0 / static_cast<double>(world.n));

    Proposition1Report report;
    report.wg_value = expected_relevance(w, world.q_values);
    report.eg_value = expected_relevance(u, world.q_values);
    report.holds = report.wg_value >= report.eg_value - 1e-12;
    report.strict = report.wg_value > report.eg_value + 1e-12;
    report.q_all_equal = true;
    for (std::size_t k = 1; k < world.n; ++k) {
        if (std::abs(world.q_values[k] - world.q_values[0]) > 1e-12) {
            report.q_all_equal = false;
            break;
        }
    }
    report.assumption_violated = !world.assumption_holds();
    return report;
}

namespace {

// Inverse-CDF draw; cdf is the inclusive prefix sum of the profile.
std::size_t draw_index(const std::vector<double>& cdf, Rng& rng) {
    const double u = rng.next_double() * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

std::vector<double> profile_cdf(const std::vector<double>& profile) {
    std::vector<double> cdf(profile.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < profile.size(); ++j) {
        if (!(profile[j] >= 0.0)) throw ValueError("negative profile mass");
        acc += profile[j];
        cdf[j] = acc;
    }
    if (!(cdf.back() > 0.0)) throw ValueError("profile has no mass");
    return cdf;
}

}  // namespace

std::vector<double> empirical_relevance_fraction(const std::vector<double>& profile,
                                                 const std::vector<bool>& relevant,
                                                 const SamplingPlan& plan, const Rng& rng) {
    plan.validate();
    if (relevant.size() != profile.size()) throw ValueError("relevant mask size mismatch");
    const std::vector<double> cdf = profile_cdf(profile);

    std::vector<double> fractions(plan.trials);
    detail::parallel_for(plan.trials, [&](std::size_t t) {
        Rng trial_rng = rng.derive(t);
        std::size_t in_r = 0;
        for (std::size_t s = 0; s < plan.m; ++s) {
            if (relevant[draw_index(cdf, trial_rng)]) ++in_r;
        }
        fractions[t] = static_cast<double>(in_r) / static_cast<double>(plan.m);
    });
    return fractions;
}

Theorem1Report check_theorem1(const std::vector<bool>& relevant, const SamplingPlan& plan,
                              const std::vector<double>& wg_profile,
                              const std::vector<double>& eg_profile, const Rng& rng) {
    plan.validate();
    if (plan.trials < 1000) throw ValueError("bound check needs at least 1000 trials");
    if (wg_profile.size() != relevant.size() || eg_profile.size() != relevant.size()) {
        throw ValueError("profile size mismatch");
    }

    Theorem1Report report;
    for (std::size_t j = 0; j < relevant.size(); ++j) {
        if (relevant[j]) {
            report.q_wg += wg_profile[j];
            report.q_eg += eg_profile[j];
        }
    }
    report.delta_x = report.q_wg - report.q_eg;
    if (report.delta_x <= 0.0) {
        report.skipped = true;
        return report;
    }

    const std::vector<double> fractions = empirical_relevance_fraction(wg_profile, relevant, plan, rng);
    std::size_t failures = 0;
    for (double q_hat : fractions) {
        if (q_hat <= report.q_eg) ++failures;
    }
    report.empirical_failure_rate =
        static_cast<double>(failures) / static_cast<double>(plan.trials);
    report.hoeffding_bound =
        std::exp(-2.0 * static_cast<double>(plan.m) * report.delta_x * report.delta_x);
    report.slack = 3.0 * std::sqrt(report.hoeffding_bound * (1.0 - report.hoeffding_bound) /
                                   static_cast<double>(plan.trials));
    report.holds = report.empirical_failure_rate <= report.hoeffding_bound + report.slack + 1e-6;
    report.m_star = static_cast<std::size_t>(
        std::ceil(std::log(1.0 / plan.delta) / (2.0 * report.delta_x * report.delta_x)));
    return report;
}

std::vector<double> mixture_profile(const RelevanceWorld& world, const std::vector<double>& weights) {
    if (weights.size() != world.n) throw ValueError("weight count mismatch");
    std::vector<double> mix(world.d, 0.0);
    std::vector<double> terms(world.n);
    for (std::size_t j = 0; j < world.d; ++j) {
        for (std::size_t k = 0; k < world.n; ++k) terms[k] = weights[k] * world.profiles[k][j];
        mix[j] = stable_sum(terms);
    }
    return mix;
}

std::vector<double> uniform_mixture_profile(const RelevanceWorld& world) {
    return mixture_profile(world, std::vector<double>(world.n, 1.0 / static_cast<double>(world.n)));
}

}  // namespace wig
