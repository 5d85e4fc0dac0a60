#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "test_helpers.hpp"
#include "wig/attribution.hpp"
#include "wig/io.hpp"

using namespace wig;
using namespace wig_test;

namespace {

BaselineSet make_baselines(Rng& rng, const std::vector<std::size_t>& shape, std::size_t n,
                           double lo = -1.0, double hi = 1.0) {
    BaselineSet set;
    for (std::size_t k = 0; k < n; ++k) set.baselines.push_back(random_tensor(rng, shape, lo, hi));
    return set;
}

}  // namespace

TEST_CASE("quadrature nodes and weights") {
    PathQuadrature lr{4, QuadratureRule::LeftRiemann};
    CHECK(lr.nodes() == std::vector<double>{0.0, 0.25, 0.5, 0.75});
    CHECK(lr.node_weights() == std::vector<double>{0.25, 0.25, 0.25, 0.25});

    PathQuadrature tz{4, QuadratureRule::Trapezoid};
    CHECK(tz.nodes() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(tz.node_weights() == std::vector<double>{0.125, 0.25, 0.25, 0.25, 0.125});

    CHECK_THROWS_AS((PathQuadrature{0, QuadratureRule::Trapezoid}).nodes(), ValueError);
}

TEST_CASE("IG on a linear model is exact for any step count") {
    const std::vector<double> w = {0.5, -2.0, 3.0};
    const Model m = linear_model(w, 0.25);
    const Tensor x({3}, {1.0, 2.0, -1.0});
    const Tensor b({3}, {0.5, -0.5, 0.0});

    for (const auto rule : {QuadratureRule::LeftRiemann, QuadratureRule::Trapezoid}) {
        for (const std::size_t steps : {1ul, 2ul, 7ul, 64ul}) {
            const AttributionMap attr = integrated_gradients(m, x, b, {steps, rule});
            REQUIRE(attr.values.size() == 3);
            for (std::size_t i = 0; i < 3; ++i) {
                CHECK(std::abs(attr.values[i] - w[i] * (x[i] - b[i])) <= 1e-12);
            }
        }
    }
}

TEST_CASE("IG with baseline equal to the input is identically zero") {
    Rng rng(5);
    Model m = random_mlp(rng, 4, 5, 2, ActivationKind::Softplus);
    const Tensor x = random_tensor(rng, {4});
    const AttributionMap attr = integrated_gradients(m, x, x, {16, QuadratureRule::Trapezoid});
    for (std::size_t i = 0; i < attr.values.size(); ++i) CHECK(attr.values[i] == 0.0);
}

TEST_CASE("IG sums channel attributions per pixel") {
    // Two channels, 1x2 spatial grid; weights pick out each scalar separately.
    LayerSpec flat = LayerSpec::flatten();
    LayerSpec head = LayerSpec::dense(1);
    head.weights = Tensor({1, 4}, {1.0, 2.0, 10.0, 20.0});
    head.bias = Tensor({1}, {0.0});
    const Model m({2, 1, 2}, {flat, head}, OutputMode::Logit, 0);

    const Tensor x({2, 1, 2}, {1.0, 1.0, 1.0, 1.0});
    const Tensor b({2, 1, 2}, {0.0, 0.0, 0.0, 0.0});
    const AttributionMap attr = integrated_gradients(m, x, b, {8, QuadratureRule::Trapezoid});
    REQUIRE(attr.values.shape() == std::vector<std::size_t>{1, 2});
    CHECK(attr.values[0] == doctest::Approx(11.0).epsilon(1e-12));  // 1 + 10
    CHECK(attr.values[1] == doctest::Approx(22.0).epsilon(1e-12));  // 2 + 20
}

TEST_CASE("IG completeness on smooth MLPs at 512 trapezoid steps") {
    Rng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        Model m = random_mlp(rng, 4, 6, 2,
                             trial % 2 ? ActivationKind::Tanh : ActivationKind::Softplus);
        const Tensor x = random_tensor(rng, {4});
        const Tensor b = random_tensor(rng, {4});
        const AttributionMap attr = integrated_gradients(m, x, b, {512, QuadratureRule::Trapezoid});
        CHECK(completeness_gap(m, x, b, attr) <= 1e-4);
    }
}

TEST_CASE("completeness gap shrinks when steps double") {
    Rng rng(17);
    int violations = 0;
    const int cases = 50;
    for (int trial = 0; trial < cases; ++trial) {
        Model m = random_mlp(rng, 3, 5, 2, ActivationKind::Softplus);
        const Tensor x = random_tensor(rng, {3});
        const Tensor b = random_tensor(rng, {3});
        const double g1 = completeness_gap(
            m, x, b, integrated_gradients(m, x, b, {32, QuadratureRule::Trapezoid}));
        const double g2 = completeness_gap(
            m, x, b, integrated_gradients(m, x, b, {64, QuadratureRule::Trapezoid}));
        if (g2 > g1 + 1e-9) ++violations;
    }
    CHECK(violations <= cases / 20);  // allow 5% roundoff flips
}

TEST_CASE("trapezoid beats left-riemann on smooth models at equal steps") {
    Rng rng(23);
    int wins = 0;
    const int cases = 20;
    for (int trial = 0; trial < cases; ++trial) {
        Model m = random_mlp(rng, 3, 5, 2, ActivationKind::Tanh);
        const Tensor x = random_tensor(rng, {3});
        const Tensor b = random_tensor(rng, {3});
        const double tz = completeness_gap(
            m, x, b, integrated_gradients(m, x, b, {64, QuadratureRule::Trapezoid}));
        const double lr = completeness_gap(
            m, x, b, integrated_gradients(m, x, b, {64, QuadratureRule::LeftRiemann}));
        if (tz <= lr) ++wins;
    }
    CHECK(wins >= cases * 3 / 4);
}

TEST_CASE("EG equals IG for a single baseline and averages two maps") {
    Rng rng(31);
    Model m = random_mlp(rng, 4, 5, 2, ActivationKind::Softplus);
    const Tensor x = random_tensor(rng, {4});
    const PathQuadrature quad{32, QuadratureRule::Trapezoid};

    BaselineSet one = make_baselines(rng, {4}, 1);
    const AttributionMap eg1 = expected_gradients(m, x, one, quad);
    const AttributionMap ig1 = integrated_gradients(m, x, one.baselines[0], quad);
    for (std::size_t i = 0; i < eg1.values.size(); ++i) {
        CHECK(eg1.values[i] == doctest::Approx(ig1.values[i]).epsilon(1e-14));
    }

    BaselineSet two = make_baselines(rng, {4}, 2);
    const AttributionMap eg2 = expected_gradients(m, x, two, quad);
    const AttributionMap a = integrated_gradients(m, x, two.baselines[0], quad);
    const AttributionMap b = integrated_gradients(m, x, two.baselines[1], quad);
    for (std::size_t i = 0; i < eg2.values.size(); ++i) {
        CHECK(std::abs(eg2.values[i] - 0.5 * (a.values[i] + b.values[i])) <= 1e-12);
    }

    CHECK_THROWS_AS(expected_gradients(m, x, BaselineSet{}, quad), ValueError);
}

TEST_CASE("EG on a linear model equals the mean-baseline closed form") {
    Rng rng(41);
    const std::vector<double> w = {1.5, -0.5, 2.0, 0.25};
    const Model m = linear_model(w, 0.0);
    const Tensor x = random_tensor(rng, {4});
    BaselineSet set = make_baselines(rng, {4}, 5);

    const AttributionMap eg = expected_gradients(m, x, set, {8, QuadratureRule::Trapezoid});
    for (std::size_t i = 0; i < 4; ++i) {
        double mean_b = 0.0;
        for (const auto& b : set.baselines) mean_b += b[i];
        mean_b /= 5.0;
        CHECK(std::abs(eg.values[i] - w[i] * (x[i] - mean_b)) <= 1e-12);
    }
}

TEST_CASE("WG with uniform weights coincides with EG elementwise") {
    Rng rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        Model m = random_mlp(rng, 4, 5, 3, ActivationKind::Softplus, OutputMode::SoftmaxProb,
                             rng.below(3));
        const Tensor x = random_tensor(rng, {4});
        const std::size_t n = 2 + rng.below(5);
        BaselineSet set = make_baselines(rng, {4}, n);
        set.weights.assign(n, 1.0 / static_cast<double>(n));

        const PathQuadrature quad{16, QuadratureRule::Trapezoid};
        const AttributionMap wg = weighted_integrated_gradients(m, x, set, quad);
        const AttributionMap eg = expected_gradients(m, x, set, quad);
        for (std::size_t i = 0; i < wg.values.size(); ++i) {
            CHECK(std::abs(wg.values[i] - eg.values[i]) <= 1e-12);
        }
    }
}

TEST_CASE("WG weight handling: one-hot and fixed mixtures") {
    Rng rng(67);
    Model m = random_mlp(rng, 3, 4, 2, ActivationKind::Tanh);
    const Tensor x = random_tensor(rng, {3});
    const PathQuadrature quad{16, QuadratureRule::Trapezoid};
    BaselineSet set = make_baselines(rng, {3}, 3);

    set.weights = {1.0, 0.0, 0.0};
    const AttributionMap one_hot = weighted_integrated_gradients(m, x, set, quad);
    const AttributionMap ig0 = integrated_gradients(m, x, set.baselines[0], quad);
    for (std::size_t i = 0; i < one_hot.values.size(); ++i) {
        CHECK(std::abs(one_hot.values[i] - ig0.values[i]) <= 1e-12);
    }

    set.weights = {0.5, 0.25, 0.25};
    const AttributionMap mix = weighted_integrated_gradients(m, x, set, quad);
    const AttributionMap ig1 = integrated_gradients(m, x, set.baselines[1], quad);
    const AttributionMap ig2 = integrated_gradients(m, x, set.baselines[2], quad);
    for (std::size_t i = 0; i < mix.values.size(); ++i) {
        const double want = 0.5 * ig0.values[i] + 0.25 * ig1.values[i] + 0.25 * ig2.values[i];
        CHECK(std::abs(mix.values[i] - want) <= 1e-12);
    }

    set.weights = {0.5, 0.5, 0.5};
    CHECK_THROWS_AS(weighted_integrated_gradients(m, x, set, quad), ValueError);
    set.weights.clear();
    CHECK_THROWS_AS(weighted_integrated_gradients(m, x, set, quad), ValueError);
}

TEST_CASE("completeness gap examples") {
    Rng rng(71);
    const Model lin = linear_model({1.0, -2.0}, 0.5);
    const Tensor x({2}, {0.7, 0.4});
    const Tensor b({2}, {-0.1, 0.2});
    const AttributionMap attr = integrated_gradients(lin, x, b, {1, QuadratureRule::LeftRiemann});
    CHECK(completeness_gap(lin, x, b, attr) <= 1e-12);

    const AttributionMap self = integrated_gradients(lin, x, x, {4, QuadratureRule::Trapezoid});
    CHECK(completeness_gap(lin, x, x, self) == 0.0);
}

TEST_CASE("generalized completeness") {
    Rng rng(83);
    const PathQuadrature quad{512, QuadratureRule::Trapezoid};

    // n=1 with weight 1 reduces to the single-baseline gap
    Model m = random_mlp(rng, 4, 6, 2, ActivationKind::Softplus);
    const Tensor x = random_tensor(rng, {4});
    BaselineSet one = make_baselines(rng, {4}, 1);
    one.weights = {1.0};
    const AttributionMap wg1 = weighted_integrated_gradients(m, x, one, quad);
    const double g1 = generalized_completeness_gap(m, x, one, wg1);
    const double g1_single = completeness_gap(m, x, one.baselines[0], wg1);
    CHECK(std::abs(g1 - g1_single) <= 1e-12);

    // exact on linear models
    const Model lin = linear_model({2.0, 1.0, -1.0, 0.5}, 0.2);
    BaselineSet set = make_baselines(rng, {4}, 3);
    set.weights = {0.2, 0.5, 0.3};
    const AttributionMap wg_lin =
        weighted_integrated_gradients(lin, x, set, {1, QuadratureRule::Trapezoid});
    CHECK(generalized_completeness_gap(lin, x, set, wg_lin) <= 1e-12);

    // smooth MLP with five fitness-like weights
    BaselineSet five = make_baselines(rng, {4}, 5);
    five.weights = {0.4, 0.25, 0.15, 0.12, 0.08};
    const AttributionMap wg5 = weighted_integrated_gradients(m, x, five, quad);
    CHECK(generalized_completeness_gap(m, x, five, wg5) <= 5e-4);
}

TEST_CASE("normalized positive profile") {
    AttributionMap attr;
    attr.values = Tensor({3}, {2.0, -1.0, 2.0});
    const auto p = normalized_positive_profile(attr);
    CHECK(p == std::vector<double>{0.5, 0.0, 0.5});

    attr.values = Tensor({3}, {-1.0, 0.0, 3.0});
    CHECK(normalized_positive_profile(attr) == std::vector<double>{0.0, 0.0, 1.0});

    attr.values = Tensor({3}, {-1.0, 0.0, -3.0});
    CHECK_THROWS_WITH_AS(normalized_positive_profile(attr), "degenerate profile", ValueError);

    // random maps renormalize to 1 and match direct recomputation
    Rng rng(91);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor t = random_tensor(rng, {10}, -1.0, 2.0);
        attr.values = t;
        const auto prof = normalized_positive_profile(attr);
        double sum = 0.0, clipped_total = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) clipped_total += std::max(t[i], 0.0);
        for (std::size_t i = 0; i < t.size(); ++i) {
            CHECK(prof[i] >= 0.0);
            CHECK(std::abs(prof[i] - std::max(t[i], 0.0) / clipped_total) <= 1e-12);
            sum += prof[i];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("implementation invariance proxy: permuted hidden basis") {
    Rng rng(111);
    const std::size_t in = 4, hidden = 6, out = 2;
    Model a = random_mlp(rng, in, hidden, out, ActivationKind::Softplus);

    // permute hidden rows of the first layer and columns of the second
    std::vector<std::size_t> perm(hidden);
    for (std::size_t i = 0; i < hidden; ++i) perm[i] = i;
    for (std::size_t i = hidden; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    LayerSpec l1 = a.layers()[0];
    LayerSpec l2 = a.layers()[2];
    LayerSpec p1 = LayerSpec::dense(hidden);
    Tensor w1({hidden, in}), b1({hidden});
    for (std::size_t h = 0; h < hidden; ++h) {
        b1[h] = l1.bias[perm[h]];
        for (std::size_t i = 0; i < in; ++i) w1[h * in + i] = l1.weights[perm[h] * in + i];
    }
    p1.weights = w1;
    p1.bias = b1;
    LayerSpec p2 = LayerSpec::dense(out);
    Tensor w2({out, hidden});
    for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t h = 0; h < hidden; ++h) w2[o * hidden + h] = l2.weights[o * hidden + perm[h]];
    }
    p2.weights = w2;
    p2.bias = l2.bias;
    const Model b({in}, {p1, LayerSpec::act(ActivationKind::Softplus), p2},
                  OutputMode::SoftmaxProb, 0);

    const Tensor x = random_tensor(rng, {in});
    const Tensor base = random_tensor(rng, {in});
    const PathQuadrature quad{64, QuadratureRule::Trapezoid};
    const AttributionMap attr_a = integrated_gradients(a, x, base, quad);
    const AttributionMap attr_b = integrated_gradients(b, x, base, quad);
    for (std::size_t i = 0; i < attr_a.values.size(); ++i) {
        CHECK(std::abs(attr_a.values[i] - attr_b.values[i]) <= 1e-9);
    }
}

TEST_CASE("attribution maps serialize with their sidecar") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "wig_attr_test";
    fs::create_directories(dir);

    Rng rng(121);
    Model m = random_mlp(rng, 4, 5, 2, ActivationKind::Tanh);
    const Tensor x = random_tensor(rng, {4});
    BaselineSet set = make_baselines(rng, {4}, 2);
    set.weights = {0.75, 0.25};
    const AttributionMap wg = weighted_integrated_gradients(m, x, set, {16, QuadratureRule::Trapezoid});

    save_attribution(wg, dir / "wg.ntf", dir / "wg.json");
    const AttributionMap back = load_attribution(dir / "wg.ntf", dir / "wg.json");
    CHECK(back.method == AttributionMethod::WG);
    CHECK(back.metadata.steps == 16);
    CHECK(back.metadata.rule == QuadratureRule::Trapezoid);
    CHECK(back.metadata.weights == wg.metadata.weights);
    CHECK(back.metadata.baseline_ids == std::vector<std::string>{"b0", "b1"});
    for (std::size_t i = 0; i < wg.values.size(); ++i) CHECK(back.values[i] == wg.values[i]);
}
