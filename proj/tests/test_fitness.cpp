#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "test_helpers.hpp"
#include "wig/fitness.hpp"
#include "wig/io.hpp"

using namespace wig;
using namespace wig_test;

namespace {

AttributionMap map_of(std::vector<double> values) {
    const std::size_t n = values.size();
    AttributionMap attr;
    attr.values = Tensor({n}, std::move(values));
    return attr;
}

// Monotone instance with an exact hit at k_star: an additive positive-pixel
// model whose alpha is tuned so masking exactly the top k_star pixels lands
// on the target score.
struct MonotoneInstance {
    Model model;
    Tensor x;
    AttributionMap attr;
    FitnessConfig cfg;
    std::size_t k_star = 0;
};

MonotoneInstance make_monotone_instance(Rng& rng) {
    MonotoneInstance inst;
    const std::size_t d = 6 + rng.below(40);
    inst.k_star = 1 + rng.below(d - 1);
    std::vector<double> values(d);
    for (double& v : values) v = 0.2 + 1.3 * rng.next_double();

    inst.model = sum_model({d});
    inst.x = Tensor({d}, values);
    inst.attr = map_of(values);

    const auto order = argsort_desc(values);
    double total = 0.0, prefix = 0.0;
    for (double v : values) total += v;
    for (std::size_t i = 0; i < inst.k_star; ++i) prefix += values[order[i]];

    inst.cfg.alpha = 1.0 - prefix / total;  // score after masking top k_star
    inst.cfg.epsilon = 0.01;
    inst.cfg.neutral = NeutralPolicy::constant_value(0.0);
    return inst;
}

std::size_t log2_ceil(std::size_t d) {
    std::size_t bits = 0;
    std::size_t v = 1;
    while (v < d) {
        v *= 2;
        ++bits;
    }
    return bits;
}

}  // namespace

TEST_CASE("find_mask selects top pixels with index tie-break") {
    const AttributionMap attr = map_of({0.9, 0.1, 0.5});

    const Mask empty = find_mask(attr, 0);
    CHECK(empty.size == 0);
    CHECK(std::count(empty.selected.begin(), empty.selected.end(), true) == 0);

    const Mask two = find_mask(attr, 2);
    CHECK(two.size == 2);
    CHECK(two.selected == std::vector<bool>{true, false, true});

    const Mask full = find_mask(attr, 3);
    CHECK(full.size == 3);
    CHECK(std::count(full.selected.begin(), full.selected.end(), true) == 3);

    CHECK_THROWS_AS(find_mask(attr, 4), ValueError);

    const Mask tied = find_mask(map_of({0.5, 0.5, 0.1}), 1);
    CHECK(tied.selected == std::vector<bool>{true, false, false});
}

TEST_CASE("apply_mask replaces selected pixels across channels") {
    const Tensor x({2, 1, 3}, {1.0, 2.0, 3.0, 10.0, 20.0, 30.0});

    Mask none;
    none.selected = {false, false, false};
    const Tensor same = apply_mask(x, none, NeutralPolicy::constant_value(0.0));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(same[i] == x[i]);

    Mask all;
    all.selected = {true, true, true};
    all.size = 3;
    const Tensor zero = apply_mask(x, all, NeutralPolicy::constant_value(0.0));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(zero[i] == 0.0);

    Mask half;
    half.selected = {true, false, true};
    half.size = 2;
    const Tensor repl = apply_mask(x, half, NeutralPolicy::per_channel({-1.0, -2.0}));
    CHECK(repl.data() == std::vector<double>{-1.0, 2.0, -1.0, -2.0, 20.0, -2.0});

    // input untouched
    CHECK(x[0] == 1.0);

    Mask wrong;
    wrong.selected = {true};
    CHECK_THROWS_AS(apply_mask(x, wrong, NeutralPolicy::constant_value(0.0)), ValueError);
}

TEST_CASE("compute_d_alpha on ten unit pixels converges to five") {
    const Model m = sum_model({10});
    const Tensor x = Tensor::full({10}, 1.0);
    const AttributionMap attr = map_of(std::vector<double>(10, 1.0));
    FitnessConfig cfg;
    cfg.alpha = 0.5;
    cfg.epsilon = 0.01;

    // exhaustive check of the score curve: masking k of the unit pixels
    // scores 10-k, and 5 is the only k within epsilon of the target 5
    for (std::size_t k = 0; k <= 10; ++k) {
        const double score = m.forward(apply_mask(x, find_mask(attr, k), cfg.neutral));
        CHECK(score == 10.0 - static_cast<double>(k));
    }

    const FitnessResult r = compute_d_alpha(m, x, attr, cfg);
    CHECK(r.d_alpha == 5);
    CHECK(r.converged);
    CHECK(r.final_score == 5.0);

    const FitnessResult oracle = compute_d_alpha_oracle(m, x, attr, cfg);
    CHECK(oracle.d_alpha == 5);
    CHECK(oracle.converged);
}

TEST_CASE("compute_d_alpha finds a single dominating pixel") {
    // pixel 0 carries 60% of the score
    const Model m = sum_model({5});
    const Tensor x({5}, {0.6, 0.1, 0.1, 0.1, 0.1});
    const AttributionMap attr = map_of({0.6, 0.1, 0.1, 0.1, 0.1});
    FitnessConfig cfg;
    cfg.alpha = 0.5;
    cfg.epsilon = 0.01;

    const FitnessResult oracle = compute_d_alpha_oracle(m, x, attr, cfg);
    CHECK(oracle.d_alpha == 1);  // first k with score below the target
    CHECK_FALSE(oracle.converged);

    const FitnessResult r = compute_d_alpha(m, x, attr, cfg);
    CHECK(r.d_alpha == 1);
    CHECK_FALSE(r.converged);
}

TEST_CASE("compute_d_alpha rejects non-positive base scores") {
    const Model m = linear_model({1.0}, 0.0);
    const Tensor x({1}, {-2.0});  // logit mode, f(x) = -2
    const AttributionMap attr = map_of({1.0});
    FitnessConfig cfg;
    CHECK_THROWS_WITH_AS(compute_d_alpha(m, x, attr, cfg), doctest::Contains("base score"),
                         ValueError);
    CHECK_THROWS_AS(compute_d_alpha_oracle(m, x, attr, cfg), ValueError);
}

TEST_CASE("constant model never reaches the target") {
    LayerSpec head = LayerSpec::dense(1);
    head.weights = Tensor({1, 8});
    head.bias = Tensor({1}, {0.8});
    const Model m({8}, {head}, OutputMode::Logit, 0);
    const Tensor x = Tensor::full({8}, 1.0);
    const AttributionMap attr = map_of(std::vector<double>(8, 0.5));
    FitnessConfig cfg;

    const FitnessResult oracle = compute_d_alpha_oracle(m, x, attr, cfg);
    CHECK(oracle.d_alpha == 8);
    CHECK_FALSE(oracle.converged);

    const FitnessResult r = compute_d_alpha(m, x, attr, cfg);
    CHECK(r.d_alpha == 8);
    CHECK_FALSE(r.converged);
}

TEST_CASE("binary search equals the oracle on monotone instances") {
    Rng rng(2718);
    for (int trial = 0; trial < 200; ++trial) {
        MonotoneInstance inst = make_monotone_instance(rng);

        // monotone by sweep: masking positive pixels only lowers the sum
        double prev = inst.model.forward(inst.x);
        for (std::size_t k = 1; k <= inst.x.size(); ++k) {
            const double s =
                inst.model.forward(apply_mask(inst.x, find_mask(inst.attr, k), inst.cfg.neutral));
            CHECK(s <= prev + 1e-12);
            prev = s;
        }

        const FitnessResult fast = compute_d_alpha(inst.model, inst.x, inst.attr, inst.cfg);
        const FitnessResult slow = compute_d_alpha_oracle(inst.model, inst.x, inst.attr, inst.cfg);
        CHECK(fast.d_alpha == slow.d_alpha);
        CHECK(fast.d_alpha == inst.k_star);
        CHECK(fast.converged);
        CHECK(slow.converged);
    }
}

TEST_CASE("binary search stays within the log call budget") {
    Rng rng(31415);
    for (int trial = 0; trial < 50; ++trial) {
        MonotoneInstance inst = make_monotone_instance(rng);
        const std::size_t d = inst.x.size();
        const double base = inst.model.forward(inst.x);

        reset_forward_call_count();
        const FitnessResult r = compute_d_alpha(inst.model, inst.x, inst.attr, inst.cfg, base);
        const std::uint64_t calls = forward_call_count();

        CHECK(calls == r.iterations_used);
        CHECK(calls <= log2_ceil(d) + 1);
    }

    // without a precomputed base score exactly one extra evaluation happens
    MonotoneInstance inst = make_monotone_instance(rng);
    reset_forward_call_count();
    const FitnessResult r = compute_d_alpha(inst.model, inst.x, inst.attr, inst.cfg);
    CHECK(forward_call_count() == r.iterations_used + 1);
}

TEST_CASE("iteration cap cuts the search off") {
    const Model m = sum_model({64});
    Rng rng(4);
    const Tensor x = random_tensor(rng, {64}, 0.5, 1.5);
    const AttributionMap attr = map_of(std::vector<double>(x.data().begin(), x.data().end()));
    FitnessConfig cfg;
    cfg.epsilon = 1e-9;  // essentially unreachable band
    cfg.max_iterations = 2;
    const FitnessResult r = compute_d_alpha(m, x, attr, cfg);
    CHECK(r.iterations_used == 2);
    CHECK_FALSE(r.converged);
}

TEST_CASE("fitness_weights arithmetic") {
    auto results = [](std::vector<std::size_t> ds) {
        std::vector<FitnessResult> rs(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) rs[i].d_alpha = ds[i];
        return rs;
    };

    const auto w = fitness_weights(results({2, 4, 4}));
    CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(0.25).epsilon(1e-12));

    const auto uniform = fitness_weights(results({7, 7, 7, 7}));
    for (double v : uniform) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    const auto skew = fitness_weights(results({1, 1000000}));
    CHECK(skew[0] == doctest::Approx(1.0 / (1.0 + 1e-6)).epsilon(1e-12));
    CHECK(skew[1] == doctest::Approx(1e-6).epsilon(1e-3));

    // d_alpha = 0 falls back to 1 instead of dividing by zero
    const auto guarded = fitness_weights(results({0, 1}));
    CHECK(guarded[0] == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(fitness_weights({}), ValueError);
}

TEST_CASE("fitness_weights normalize and preserve order") {
    Rng rng(55);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(12);
        std::vector<FitnessResult> rs(n);
        for (auto& r : rs) r.d_alpha = rng.below(50);
        const auto w = fitness_weights(rs);
        CHECK(std::abs(stable_sum(w) - 1.0) <= 1e-12);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(w[i] >= 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                if (std::max<std::size_t>(rs[i].d_alpha, 1) <= std::max<std::size_t>(rs[j].d_alpha, 1)) {
                    CHECK(w[i] >= w[j] - 1e-15);
                }
            }
        }
    }
}

TEST_CASE("filter_baselines keeps the fittest and reweights") {
    Rng rng(77);
    BaselineSet set;
    for (int k = 0; k < 3; ++k) set.baselines.push_back(random_tensor(rng, {4}));

    std::vector<FitnessResult> rs(3);
    rs[0].d_alpha = 2;
    rs[1].d_alpha = 9;
    rs[2].d_alpha = 3;

    const BaselineSet same = filter_baselines(set, rs, 0);
    CHECK(same.size() == 3);
    CHECK(same.weights == fitness_weights(rs));

    const BaselineSet two = filter_baselines(set, rs, 1);
    REQUIRE(two.size() == 2);
    CHECK(two.ids == std::vector<std::string>{"b0", "b2"});
    CHECK(two.baselines[0].data() == set.baselines[0].data());
    CHECK(two.baselines[1].data() == set.baselines[2].data());
    CHECK(std::abs(stable_sum(two.weights) - 1.0) <= 1e-12);

    const BaselineSet best = filter_baselines(set, rs, 2);
    REQUIRE(best.size() == 1);
    CHECK(best.ids == std::vector<std::string>{"b0"});
    CHECK(best.weights == std::vector<double>{1.0});

    CHECK_THROWS_AS(filter_baselines(set, rs, 3), ValueError);
}

TEST_CASE("filter_baselines drops higher index on ties and keeps only fitter survivors") {
    Rng rng(88);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(8);
        std::vector<FitnessResult> rs(n);
        for (std::size_t k = 0; k < n; ++k) rs[k].d_alpha = rng.below(6);
        const std::size_t remove = rng.below(n);
        const auto kept = surviving_indices(rs, remove);
        CHECK(kept.size() == n - remove);

        std::size_t max_kept = 0;
        for (std::size_t i : kept) max_kept = std::max(max_kept, rs[i].d_alpha);
        std::vector<bool> is_kept(n, false);
        for (std::size_t i : kept) is_kept[i] = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (!is_kept[i]) CHECK(rs[i].d_alpha >= max_kept);
        }
    }

    // explicit tie: equal d_alpha drops the higher original index first
    std::vector<FitnessResult> tie(3);
    tie[0].d_alpha = 5;
    tie[1].d_alpha = 5;
    tie[2].d_alpha = 5;
    CHECK(surviving_indices(tie, 2) == std::vector<std::size_t>{0});
}

TEST_CASE("fitness report serializes to csv") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "wig_fitness_test";
    fs::create_directories(dir);

    Rng rng(5);
    BaselineSet set;
    set.baselines.push_back(random_tensor(rng, {2}));
    set.baselines.push_back(random_tensor(rng, {2}));
    std::vector<FitnessResult> rs(2);
    rs[0] = {3, true, 0.49, 4};
    rs[1] = {7, false, 0.61, 7};
    const auto w = fitness_weights(rs);

    write_fitness_report(dir / "fit.csv", set, rs, w);
    const auto rows = read_csv(dir / "fit.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"baseline_id", "d_alpha", "converged", "final_score",
                                              "iterations", "weight"});
    CHECK(rows[1][0] == "b0");
    CHECK(rows[1][1] == "3");
    CHECK(rows[1][2] == "true");
    CHECK(rows[2][2] == "false");
}

TEST_CASE("dataset-mean neutral averages per channel across images") {
    const Tensor a({2, 1, 2}, {1.0, 3.0, 10.0, 30.0});
    const Tensor b({2, 1, 2}, {5.0, 7.0, 50.0, 70.0});
    const NeutralPolicy n = NeutralPolicy::dataset_mean({a, b});
    CHECK(n.value_for_channel(0) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(n.value_for_channel(1) == doctest::Approx(40.0).epsilon(1e-15));

    CHECK_THROWS_AS(NeutralPolicy::dataset_mean({}), ValueError);
    CHECK_THROWS_AS(NeutralPolicy::dataset_mean({a, Tensor({1, 1, 2}, {1.0, 2.0})}), ValueError);
}
