// Times the OpenMP kernels against their serial references on a mid-size
// workload. Build with -DCMAKE_BUILD_TYPE=Release for meaningful numbers.
#include <chrono>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "wig/reference.hpp"
#include "wig/synthetic.hpp"

using namespace wig;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warmup
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s serial %9.2f ms   parallel %9.2f ms   speedup %.2fx\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP with up to %d threads\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns run serial code\n");
#endif

    SyntheticConfig data_cfg;
    data_cfg.count = 40;
    data_cfg.height = 20;
    data_cfg.width = 20;
    data_cfg.seed = 7;
    const auto samples = make_synthetic_dataset(data_cfg);

    std::vector<Sample> train_set;
    for (const auto& s : samples) train_set.push_back({s.image, s.label});
    LayerSpec flat = LayerSpec::flatten();
    const auto trained = train_model({1, 20, 20},
                                     {flat, LayerSpec::dense(48), LayerSpec::act(ActivationKind::Softplus),
                                      LayerSpec::dense(2)},
                                     train_set, 5, 0.05, Rng(3));
    const Model& model = trained.model;
    const Tensor& x = samples[0].image;

    BaselineSet baselines;
    for (std::size_t k = 1; k <= 8; ++k) baselines.baselines.push_back(samples[k].image);

    const PathQuadrature quad{512, QuadratureRule::Trapezoid};
    report("IG, 512 trapezoid steps",
           time_ms([&] { reference::integrated_gradients_serial(model, x, baselines.baselines[0], quad); }, 10),
           time_ms([&] { integrated_gradients(model, x, baselines.baselines[0], quad); }, 10));

    const PathQuadrature quad64{64, QuadratureRule::Trapezoid};
    report("EG, 8 baselines x 64 steps",
           time_ms([&] { reference::expected_gradients_serial(model, x, baselines, quad64); }, 10),
           time_ms([&] { expected_gradients(model, x, baselines, quad64); }, 10));

    AttributionMap attr = integrated_gradients(model, x, baselines.baselines[0], quad64);
    const NeutralPolicy neutral = NeutralPolicy::constant_value(0.0);
    report("deletion curve, N=400",
           time_ms([&] { reference::deletion_curve_serial(model, x, attr, 400, neutral); }, 10),
           time_ms([&] { deletion_curve(model, x, attr, 400, neutral); }, 10));

    std::vector<double> profile(512);
    double total = 0.0;
    Rng rng(11);
    for (double& p : profile) {
        p = rng.next_double();
        total += p;
    }
    for (double& p : profile) p /= total;
    std::vector<bool> relevant(512, false);
    for (std::size_t j = 0; j < 128; ++j) relevant[j] = true;
    SamplingPlan plan{200, 20000, 0.05};
    report("Monte Carlo, 2e4 x 200 draws",
           time_ms([&] { reference::empirical_relevance_fraction_serial(profile, relevant, plan, Rng(1)); }, 3),
           time_ms([&] { empirical_relevance_fraction(profile, relevant, plan, Rng(1)); }, 3));

    return 0;
}
