#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wig/attribution.hpp"
#include "wig/error.hpp"
#include "wig/evaluation.hpp"
#include "wig/experiment.hpp"
#include "wig/fitness.hpp"
#include "wig/io.hpp"
#include "wig/model.hpp"
#include "wig/synthetic.hpp"
#include "wig/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTheory = 3;

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// JSON config values fill in options the command line left untouched;
// unknown keys are rejected.
class ConfigKeys {
public:
    template <typename T>
    void bind(CLI::Option* opt, const std::string& key, T& var) {
        entries_[key] = {opt, [&var, key](const json& v) {
                             try {
                                 var = v.get<T>();
                             } catch (const json::exception&) {
                                 throw UsageError("config key '" + key + "' has the wrong type");
                             }
                         }};
    }

    void apply(const fs::path& config_path) {
        std::ifstream in(config_path);
        if (!in) throw UsageError("cannot open config " + config_path.string());
        json cfg;
        try {
            in >> cfg;
        } catch (const json::exception& e) {
            throw UsageError("config " + config_path.string() + ": " + e.what());
        }
        if (!cfg.is_object()) throw UsageError("config must be a JSON object");
        for (const auto& [key, value] : cfg.items()) {
            auto it = entries_.find(key);
            if (it == entries_.end()) throw UsageError("unknown config key '" + key + "'");
            if (it->second.opt->count() == 0) {
                it->second.set(value);
                applied_.insert(key);
            }
        }
    }

    bool was_applied(const std::string& key) const { return applied_.count(key) > 0; }

private:
    struct Entry {
        CLI::Option* opt;
        std::function<void(const json&)> set;
    };
    std::map<std::string, Entry> entries_;
    std::set<std::string> applied_;
};

// Flags beat config beats the WIG_SEED environment variable.
std::uint64_t resolve_seed(std::uint64_t flag_value, const CLI::Option* seed_opt,
                           const ConfigKeys& config) {
    if (seed_opt->count() > 0 || config.was_applied("seed")) return flag_value;
    if (const char* env = std::getenv("WIG_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw UsageError(std::string("WIG_SEED is not an integer: '") + env + "'");
        }
    }
    return flag_value;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t next = text.find(sep, pos);
        if (next == std::string::npos) next = text.size();
        out.push_back(text.substr(pos, next - pos));
        pos = next + 1;
    }
    if (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

std::vector<wig::LayerSpec> parse_architecture(const std::string& text) {
    using wig::LayerSpec;
    std::vector<LayerSpec> layers;
    for (const std::string& tok : split(text, '/')) {
        try {
            if (tok.rfind("dense:", 0) == 0) {
                layers.push_back(LayerSpec::dense(std::stoul(tok.substr(6))));
            } else if (tok.rfind("conv:", 0) == 0) {
                const auto dims = split(tok.substr(5), 'x');
                if (dims.size() < 2 || dims.size() > 3) {
                    throw UsageError("conv wants conv:<filters>x<k> or conv:<filters>x<kh>x<kw>");
                }
                const std::size_t f = std::stoul(dims[0]);
                const std::size_t kh = std::stoul(dims[1]);
                const std::size_t kw = dims.size() == 3 ? std::stoul(dims[2]) : kh;
                layers.push_back(LayerSpec::conv2d(f, kh, kw));
            } else if (tok == "relu" || tok == "softplus" || tok == "tanh") {
                layers.push_back(LayerSpec::act(wig::activation_from_string(tok)));
            } else if (tok == "flatten") {
                layers.push_back(LayerSpec::flatten());
            } else if (tok == "gap" || tok == "global-avg-pool") {
                layers.push_back(LayerSpec::global_avg_pool());
            } else {
                throw UsageError("unknown architecture token '" + tok + "'");
            }
        } catch (const std::invalid_argument&) {
            throw UsageError("bad architecture token '" + tok + "'");
        }
    }
    if (layers.empty()) throw UsageError("empty architecture");
    return layers;
}

std::string file_stem(const fs::path& p) {
    fs::path q = p.filename();
    while (!q.extension().empty()) q = q.stem();
    return q.string();
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
    std::string out;
    wig::SyntheticConfig cfg;
};

// Parameter-range problems are usage errors no matter whether the value
// came from a flag or a config file.
template <typename Fn>
void validate_params(Fn&& fn) {
    try {
        fn();
    } catch (const wig::ValueError& e) {
        throw UsageError(e.what());
    }
}

int run_gen_data(const GenDataArgs& args) {
    validate_params([&] { args.cfg.validate(); });
    wig::write_synthetic_dataset(args.out, args.cfg);
    std::cout << "wrote " << args.cfg.count << " samples to " << args.out << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string data;
    std::string arch = "flatten/dense:16/softplus/dense:2";
    std::size_t epochs = 30;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
    std::string output_mode = "softmax-prob";
    std::size_t class_index = 0;
    std::string out;
};

int run_train(const TrainArgs& args) {
    const auto dataset = wig::load_dataset(args.data);
    if (dataset.empty()) throw wig::ValueError("empty dataset");
    const auto result = wig::train_model(dataset.front().input.shape(),
                                         parse_architecture(args.arch), dataset, args.epochs,
                                         args.learning_rate, wig::Rng(args.seed),
                                         wig::output_mode_from_string(args.output_mode),
                                         args.class_index);
    wig::save_model(result.model, args.out);
    std::cout << "training accuracy " << wig::format_double(result.accuracy) << "\n";
    std::cout << "saved " << args.out << "\n";
    return kExitOk;
}

// --------------------------------------------------------------- attribute

struct AttributeArgs {
    std::string model;
    std::string input;
    std::string method = "wg";
    std::string baselines;      // comma-separated NTF paths
    std::string baseline_data;  // manifest to sample from
    std::size_t n_baselines = 8;
    std::size_t remove_count = 1;
    std::size_t steps = 64;
    std::string rule = "trapezoid";
    double alpha = 0.5;
    double epsilon = 0.01;
    std::size_t max_iterations = 100;
    double neutral = 0.0;
    std::string neutral_mode = "constant";  // or dataset-mean
    long long class_index = -1;  // -1 means predicted class
    bool strict_fitness = false;
    std::uint64_t seed = 0;
    std::string out;
};

int run_attribute(const AttributeArgs& args) {
    std::string token = args.method;
    if (token == "wg-filtered") token += ":" + std::to_string(args.remove_count);
    wig::MethodSpec spec;
    wig::PathQuadrature quad{args.steps, wig::QuadratureRule::Trapezoid};
    wig::FitnessConfig fitness;
    fitness.alpha = args.alpha;
    fitness.epsilon = args.epsilon;
    fitness.max_iterations = args.max_iterations;
    fitness.neutral = wig::NeutralPolicy::constant_value(args.neutral);
    validate_params([&] {
        spec = wig::MethodSpec::parse(token);
        quad.rule = wig::quadrature_rule_from_string(args.rule);
        quad.validate();
        fitness.validate();
        if (args.neutral_mode != "constant" && args.neutral_mode != "dataset-mean") {
            throw wig::ValueError("neutral-mode must be constant or dataset-mean");
        }
    });

    wig::Model model = wig::load_model(args.model);
    const wig::Tensor x = wig::read_ntf(args.input);

    if (args.class_index >= 0) {
        model = model.with_class_index(static_cast<std::size_t>(args.class_index));
    } else {
        model = model.with_class_index(model.predict(x));
    }

    wig::BaselineSet baselines;
    if (!args.baselines.empty()) {
        for (const std::string& path : split(args.baselines, ',')) {
            baselines.baselines.push_back(wig::read_ntf(path));
            baselines.ids.push_back(file_stem(path));
        }
    } else if (!args.baseline_data.empty()) {
        const auto pool = wig::load_dataset(args.baseline_data);
        if (pool.size() < args.n_baselines) {
            throw wig::ValueError("dataset has fewer images than --n-baselines");
        }
        std::vector<std::size_t> idx(pool.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        wig::Rng rng(args.seed);
        for (std::size_t i = 0; i < args.n_baselines; ++i) {
            const std::size_t j = i + rng.below(idx.size() - i);
            std::swap(idx[i], idx[j]);
            baselines.baselines.push_back(pool[idx[i]].input);
            baselines.ids.push_back("sample" + std::to_string(idx[i]));
        }
    } else {
        throw UsageError("provide --baselines or --baseline-data");
    }

    if (args.neutral_mode == "dataset-mean") {
        fitness.neutral = wig::NeutralPolicy::dataset_mean(baselines.baselines);
    }

    const wig::MethodRun run =
        wig::run_attribution_method(model, x, baselines, spec, quad, fitness, args.strict_fitness);

    const fs::path out_prefix = args.out;
    wig::save_attribution(run.attribution, out_prefix.string() + ".ntf",
                          out_prefix.string() + ".json");
    for (const auto& per : run.per_baseline) {
        wig::write_ntf(out_prefix.string() + ".ig." + per.metadata.baseline_ids.front() + ".ntf",
                       per.values);
    }
    if (!run.fitness.empty()) {
        wig::write_fitness_report(out_prefix.string() + ".fitness.csv", baselines, run.fitness,
                                  run.weights);
    }
    std::cout << "wrote " << out_prefix.string() << ".ntf\n";
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string model;
    std::string data;
    std::string methods = "eg,wg";
    std::size_t n_points = 100;
    std::size_t steps = 64;
    std::string rule = "trapezoid";
    std::size_t n_baselines = 8;
    double alpha = 0.5;
    double epsilon = 0.01;
    std::size_t max_iterations = 100;
    double neutral = 0.0;
    std::string neutral_mode = "constant";  // or dataset-mean
    bool strict_fitness = false;
    std::uint64_t seed = 0;
    std::string out;
};

int run_evaluate(const EvaluateArgs& args) {
    wig::EvalOptions options;
    options.n_baselines = args.n_baselines;
    options.quad = {args.steps, wig::QuadratureRule::Trapezoid};
    options.curve_points = args.n_points;
    options.fitness.alpha = args.alpha;
    options.fitness.epsilon = args.epsilon;
    options.fitness.max_iterations = args.max_iterations;
    options.fitness.neutral = wig::NeutralPolicy::constant_value(args.neutral);
    options.strict_fitness = args.strict_fitness;
    options.seed = args.seed;
    validate_params([&] {
        for (const std::string& tok : split(args.methods, ',')) {
            options.methods.push_back(wig::MethodSpec::parse(tok));
        }
        options.quad.rule = wig::quadrature_rule_from_string(args.rule);
        options.validate();
        if (args.neutral_mode != "constant" && args.neutral_mode != "dataset-mean") {
            throw wig::ValueError("neutral-mode must be constant or dataset-mean");
        }
    });

    const wig::Model model = wig::load_model(args.model);

    const auto manifest = wig::read_csv(args.data);
    const fs::path dir = fs::path(args.data).parent_path();
    std::vector<wig::EvalSample> samples;
    bool missing_masks = false;
    for (std::size_t r = 0; r < manifest.size(); ++r) {
        const auto& row = manifest[r];
        if (r == 0 && row.size() >= 2 && row[0] == "path") continue;
        if (row.size() < 2) throw wig::IoError(args.data + ": bad manifest row");
        wig::EvalSample s;
        s.id = file_stem(row[0]);
        s.image = wig::read_ntf(dir / row[0]);
        const fs::path mask = wig::mask_path_for(dir / row[0]);
        if (fs::exists(mask)) {
            s.ground_truth = wig::GroundTruthMask::from_tensor(wig::read_ntf(mask));
        } else {
            missing_masks = true;
        }
        samples.push_back(std::move(s));
    }
    if (missing_masks) {
        std::cerr << "warning: ground-truth masks missing; overlap columns omitted\n";
        for (auto& s : samples) s.ground_truth.reset();
    }
    if (args.neutral_mode == "dataset-mean") {
        std::vector<wig::Tensor> images;
        images.reserve(samples.size());
        for (const auto& s : samples) images.push_back(s.image);
        options.fitness.neutral = wig::NeutralPolicy::dataset_mean(images);
    }

    const wig::EvalOutcome outcome = wig::evaluate_dataset(model, samples, options);

    fs::create_directories(args.out);
    const bool with_overlap = outcome.has_overlap && !missing_masks;
    std::vector<std::vector<std::string>> per_sample;
    if (with_overlap) {
        per_sample.push_back({"sample_id", "method", "deletion_auc", "overlap_auc"});
    } else {
        per_sample.push_back({"sample_id", "method", "deletion_auc"});
    }
    for (const auto& row : outcome.rows) {
        std::vector<std::string> cells = {row.sample_id, row.method,
                                          wig::format_double(row.deletion_auc)};
        if (with_overlap) {
            cells.push_back(row.overlap_auc ? wig::format_double(*row.overlap_auc) : "");
        }
        per_sample.push_back(std::move(cells));
    }
    wig::write_csv(fs::path(args.out) / "per_sample.csv", per_sample);
    wig::write_csv(fs::path(args.out) / "summary.csv",
                   wig::summarize_outcome(outcome, options.methods));
    std::cout << "wrote " << (fs::path(args.out) / "summary.csv").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string out;
    std::size_t worlds = 10000;
    std::size_t trials = 10000;
    std::size_t n = 6;
    std::size_t d = 50;
    double relevant_fraction = 0.2;
    double spread = 0.3;
    std::string m_grid = "10,50,100,500";
    std::string delta_grid = "0.05,0.1,0.2,0.4";
    std::string confidence_grid = "0.1,0.05,0.01";
    std::uint64_t seed = 0;
    bool adversarial = false;
};

int run_simulate(const SimulateArgs& args) {
    if (args.trials == 0) throw UsageError("trials must be positive");
    if (args.worlds == 0) throw UsageError("worlds must be positive");
    if (!(args.relevant_fraction > 0.0 && args.relevant_fraction < 1.0)) {
        throw UsageError("relevant-fraction must lie in (0,1)");
    }
    fs::create_directories(args.out);
    bool all_pass = true;

    // Ordering inequality over generated worlds.
    wig::Rng world_rng(args.seed);
    std::size_t holds = 0, strict_expected = 0, strict_held = 0, violations = 0, flagged = 0;
    for (std::size_t i = 0; i < args.worlds; ++i) {
        const wig::RelevanceWorld world =
            args.adversarial
                ? wig::generate_adversarial_world(args.n, args.d, args.relevant_fraction,
                                                  args.spread, world_rng)
                : wig::generate_world(args.n, args.d, args.relevant_fraction, args.spread,
                                      world_rng);
        const wig::Proposition1Report r = wig::check_proposition1(world);
        if (r.holds) ++holds;
        else ++violations;
        if (!r.q_all_equal) ++strict_expected;
        if (r.strict) ++strict_held;
        if (r.assumption_violated) ++flagged;
    }
    const bool prop1_pass = args.adversarial
                                ? violations >= 1  // the checker must notice broken worlds
                                : (violations == 0 && strict_held == strict_expected);
    all_pass = all_pass && prop1_pass;

    json prop1;
    prop1["check"] = "proposition1";
    prop1["adversarial"] = args.adversarial;
    prop1["worlds"] = args.worlds;
    prop1["holds"] = holds;
    prop1["violations"] = violations;
    prop1["strict_expected"] = strict_expected;
    prop1["strict_held"] = strict_held;
    prop1["assumption_violated_worlds"] = flagged;
    prop1["pass"] = prop1_pass;
    wig::atomic_write(fs::path(args.out) / "proposition1.json", prop1.dump(2) + "\n");

    // Concentration bound sweep over exact-margin profiles.
    std::vector<std::size_t> m_grid;
    for (const auto& tok : split(args.m_grid, ',')) m_grid.push_back(std::stoul(tok));
    std::vector<double> delta_grid;
    for (const auto& tok : split(args.delta_grid, ',')) delta_grid.push_back(std::stod(tok));
    std::vector<double> conf_grid;
    for (const auto& tok : split(args.confidence_grid, ',')) conf_grid.push_back(std::stod(tok));

    const std::size_t r_size =
        std::min<std::size_t>(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                                           args.relevant_fraction * args.d))),
                              args.d - 1);
    std::vector<bool> relevant(args.d, false);
    for (std::size_t j = 0; j < r_size; ++j) relevant[j] = true;
    const auto profile_with_mass = [&](double q) {
        std::vector<double> p(args.d);
        for (std::size_t j = 0; j < args.d; ++j) {
            p[j] = relevant[j] ? q / static_cast<double>(r_size)
                               : (1.0 - q) / static_cast<double>(args.d - r_size);
        }
        return p;
    };
    const double q_eg = 0.3;

    std::vector<std::vector<std::string>> grid_rows;
    grid_rows.push_back(
        {"m", "delta", "trials", "empirical_failure_rate", "hoeffding_bound", "slack", "holds"});
    json thm1;
    thm1["check"] = "theorem1";
    json cells = json::array();
    std::uint64_t cell_stream = 0;
    bool grid_pass = true;
    for (const double delta : delta_grid) {
        if (q_eg + delta >= 1.0) throw UsageError("delta grid value too large");
        for (const std::size_t m : m_grid) {
            wig::SamplingPlan plan{m, args.trials, 0.05};
            const wig::Theorem1Report r = wig::check_theorem1(
                relevant, plan, profile_with_mass(q_eg + delta), profile_with_mass(q_eg),
                wig::Rng(args.seed).derive(0x7400 + cell_stream));
            ++cell_stream;
            grid_pass = grid_pass && (r.skipped || r.holds);
            grid_rows.push_back({std::to_string(m), wig::format_double(delta),
                                 std::to_string(args.trials),
                                 wig::format_double(r.empirical_failure_rate),
                                 wig::format_double(r.hoeffding_bound), wig::format_double(r.slack),
                                 r.holds ? "true" : "false"});
            json cell;
            cell["m"] = m;
            cell["delta"] = delta;
            cell["empirical_failure_rate"] = r.empirical_failure_rate;
            cell["hoeffding_bound"] = r.hoeffding_bound;
            cell["slack"] = r.slack;
            cell["holds"] = r.holds;
            cells.push_back(std::move(cell));
        }
    }
    thm1["grid"] = std::move(cells);
    wig::write_csv(fs::path(args.out) / "theorem1_grid.csv", grid_rows);

    // Sample-size rule: at m_star(confidence) the success rate must clear
    // 1 - confidence minus Monte Carlo slack.
    json mstar_rows = json::array();
    bool mstar_pass = true;
    for (const double conf : conf_grid) {
        if (!(conf > 0.0 && conf < 1.0)) throw UsageError("confidence must lie in (0,1)");
        for (const double delta : delta_grid) {
            const auto m_star = static_cast<std::size_t>(
                std::ceil(std::log(1.0 / conf) / (2.0 * delta * delta)));
            wig::SamplingPlan plan{m_star, args.trials, conf};
            const wig::Theorem1Report r = wig::check_theorem1(
                relevant, plan, profile_with_mass(q_eg + delta), profile_with_mass(q_eg),
                wig::Rng(args.seed).derive(0x9900 + cell_stream));
            ++cell_stream;
            const double sigma = std::sqrt(conf * (1.0 - conf) / static_cast<double>(args.trials));
            const double success = 1.0 - r.empirical_failure_rate;
            const bool ok = r.skipped || success >= 1.0 - conf - 3.0 * sigma;
            mstar_pass = mstar_pass && ok;
            json row;
            row["confidence"] = conf;
            row["delta"] = delta;
            row["m_star"] = m_star;
            row["success_rate"] = success;
            row["threshold"] = 1.0 - conf - 3.0 * sigma;
            row["pass"] = ok;
            mstar_rows.push_back(std::move(row));
        }
    }
    thm1["m_star"] = std::move(mstar_rows);

    // One generated world exercised end to end through the mixtures.
    {
        wig::Rng rng(args.seed ^ 0x5151);
        const wig::RelevanceWorld world =
            wig::generate_world(args.n, args.d, args.relevant_fraction, args.spread, rng);
        std::vector<wig::FitnessResult> rs(world.n);
        for (std::size_t k = 0; k < world.n; ++k) rs[k].d_alpha = world.d_alphas[k];
        const auto wg_mix = wig::mixture_profile(world, wig::fitness_weights(rs));
        const auto eg_mix = wig::uniform_mixture_profile(world);
        wig::SamplingPlan plan{100, args.trials, 0.05};
        const wig::Theorem1Report r =
            wig::check_theorem1(world.relevant, plan, wg_mix, eg_mix, wig::Rng(args.seed ^ 0xabcd));
        json gw;
        gw["delta_x"] = r.delta_x;
        gw["skipped"] = r.skipped;
        gw["empirical_failure_rate"] = r.empirical_failure_rate;
        gw["hoeffding_bound"] = r.hoeffding_bound;
        gw["holds"] = r.skipped ? true : r.holds;
        thm1["generated_world"] = std::move(gw);
        grid_pass = grid_pass && (r.skipped || r.holds);
    }

    thm1["pass"] = grid_pass && mstar_pass;
    all_pass = all_pass && grid_pass && mstar_pass;
    wig::atomic_write(fs::path(args.out) / "theorem1.json", thm1.dump(2) + "\n");

    std::cout << (all_pass ? "all checks passed" : "checks FAILED") << "\n";
    return all_pass ? kExitOk : kExitTheory;
}

// ------------------------------------------------------------------ render

struct RenderArgs {
    std::string attr;
    std::string out;
};

int run_render(const RenderArgs& args) {
    const wig::Tensor t = wig::read_ntf(args.attr);
    std::size_t height = 1, width = 0;
    if (t.shape().size() == 1) {
        width = t.shape()[0];
    } else if (t.shape().size() == 2) {
        height = t.shape()[0];
        width = t.shape()[1];
    } else {
        throw wig::ValueError("render expects a 1-D or 2-D map, got shape " +
                              wig::shape_to_string(t.shape()));
    }

    double lo = t[0], hi = t[0];
    for (std::size_t i = 0; i < t.size(); ++i) {
        lo = std::min(lo, t[i]);
        hi = std::max(hi, t[i]);
    }
    std::vector<std::uint8_t> pixels(t.size());
    if (hi == lo) {
        std::fill(pixels.begin(), pixels.end(), static_cast<std::uint8_t>(128));
    } else {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double norm = (t[i] - lo) / (hi - lo);
            pixels[i] = static_cast<std::uint8_t>(std::lround(norm * 255.0));
        }
    }
    wig::write_pgm(args.out, width, height, pixels);
    std::cout << "wrote " << args.out << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature attribution with fitness-weighted baselines"};
    app.require_subcommand(1);

    GenDataArgs gen;
    TrainArgs train;
    AttributeArgs attribute;
    EvaluateArgs evaluate;
    SimulateArgs simulate;
    RenderArgs render;

    std::string config_path;
    ConfigKeys gen_keys, train_keys, attr_keys, eval_keys, sim_keys;

    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic labeled image dataset");
    {
        auto& c = gen.cfg;
        gen_keys.bind(gen_cmd->add_option("--out", gen.out, "Output directory")->required(), "out",
                      gen.out);
        gen_keys.bind(gen_cmd->add_option("--count", c.count, "Number of samples"), "count", c.count);
        gen_keys.bind(gen_cmd->add_option("--height", c.height, "Image height"), "height", c.height);
        gen_keys.bind(gen_cmd->add_option("--width", c.width, "Image width"), "width", c.width);
        gen_keys.bind(gen_cmd->add_option("--channels", c.channels, "Image channels"), "channels",
                      c.channels);
        gen_keys.bind(gen_cmd->add_option("--signal-shape", c.signal_shape,
                                          "Side of the class pattern's bounding box"),
                      "signal-shape", c.signal_shape);
        gen_keys.bind(gen_cmd->add_option("--noise-sigma", c.noise_sigma, "Background noise sigma"),
                      "noise-sigma", c.noise_sigma);
        gen_keys.bind(gen_cmd->add_option("--seed", c.seed, "Random seed"), "seed", c.seed);
        gen_cmd->add_option("--config", config_path, "JSON config with defaults");
    }

    auto* train_cmd = app.add_subcommand("train", "Train a small model on an NTF dataset");
    {
        train_keys.bind(train_cmd->add_option("--data", train.data, "Manifest CSV")->required(),
                        "data", train.data);
        train_keys.bind(train_cmd->add_option("--arch", train.arch, "Architecture string"), "arch",
                        train.arch);
        train_keys.bind(train_cmd->add_option("--epochs", train.epochs, "Training epochs"), "epochs",
                        train.epochs);
        train_keys.bind(train_cmd->add_option("--lr", train.learning_rate, "Learning rate"), "lr",
                        train.learning_rate);
        train_keys.bind(train_cmd->add_option("--seed", train.seed, "Random seed"), "seed",
                        train.seed);
        train_keys.bind(train_cmd->add_option("--output-mode", train.output_mode,
                                              "logit | sigmoid | softmax-prob"),
                        "output-mode", train.output_mode);
        train_keys.bind(train_cmd->add_option("--class-index", train.class_index,
                                              "Class whose score forward() reports"),
                        "class-index", train.class_index);
        train_keys.bind(train_cmd->add_option("--out", train.out, "Checkpoint path")->required(),
                        "out", train.out);
        train_cmd->add_option("--config", config_path, "JSON config with defaults");
    }

    auto* attr_cmd = app.add_subcommand("attribute", "Attribute one input against baselines");
    {
        auto& a = attribute;
        attr_keys.bind(attr_cmd->add_option("--model", a.model, "Checkpoint JSON")->required(),
                       "model", a.model);
        attr_keys.bind(attr_cmd->add_option("--input", a.input, "Input NTF")->required(), "input",
                       a.input);
        attr_keys.bind(attr_cmd->add_option("--method", a.method, "ig | eg | wg | wg-filtered"),
                       "method", a.method);
        attr_keys.bind(attr_cmd->add_option("--baselines", a.baselines,
                                            "Comma-separated baseline NTF paths"),
                       "baselines", a.baselines);
        attr_keys.bind(attr_cmd->add_option("--baseline-data", a.baseline_data,
                                            "Manifest CSV to sample baselines from"),
                       "baseline-data", a.baseline_data);
        attr_keys.bind(attr_cmd->add_option("--n-baselines", a.n_baselines,
                                            "Baselines to sample from --baseline-data"),
                       "n-baselines", a.n_baselines);
        attr_keys.bind(attr_cmd->add_option("--remove-count", a.remove_count,
                                            "Baselines dropped by wg-filtered"),
                       "remove-count", a.remove_count);
        attr_keys.bind(attr_cmd->add_option("--steps", a.steps, "Quadrature steps"), "steps",
                       a.steps);
        attr_keys.bind(attr_cmd->add_option("--rule", a.rule, "left-riemann | trapezoid"), "rule",
                       a.rule);
        attr_keys.bind(attr_cmd->add_option("--alpha", a.alpha, "Fitness target ratio"), "alpha",
                       a.alpha);
        attr_keys.bind(attr_cmd->add_option("--epsilon", a.epsilon, "Fitness convergence band"),
                       "epsilon", a.epsilon);
        attr_keys.bind(attr_cmd->add_option("--max-iterations", a.max_iterations,
                                            "Fitness search iteration cap"),
                       "max-iterations", a.max_iterations);
        attr_keys.bind(attr_cmd->add_option("--neutral", a.neutral, "Masked-pixel value"), "neutral",
                       a.neutral);
        attr_keys.bind(attr_cmd->add_option("--neutral-mode", a.neutral_mode,
                                            "constant | dataset-mean (per-channel baseline mean)"),
                       "neutral-mode", a.neutral_mode);
        attr_keys.bind(attr_cmd->add_option("--class-index", a.class_index,
                                            "Class to explain (-1: predicted)"),
                       "class-index", a.class_index);
        attr_cmd->add_flag("--strict-fitness", a.strict_fitness,
                           "Exclude non-converged baselines from the weighting");
        attr_keys.bind(attr_cmd->add_option("--seed", a.seed, "Random seed"), "seed", a.seed);
        attr_keys.bind(attr_cmd->add_option("--out", a.out, "Output prefix")->required(), "out",
                       a.out);
        attr_cmd->add_option("--config", config_path, "JSON config with defaults");
    }

    auto* eval_cmd = app.add_subcommand("evaluate", "Deletion/overlap metrics over a dataset");
    {
        auto& e = evaluate;
        eval_keys.bind(eval_cmd->add_option("--model", e.model, "Checkpoint JSON")->required(),
                       "model", e.model);
        eval_keys.bind(eval_cmd->add_option("--data", e.data, "Manifest CSV")->required(), "data",
                       e.data);
        eval_keys.bind(eval_cmd->add_option("--methods", e.methods,
                                            "Comma list: ig, eg, wg, wg-filtered:<r>"),
                       "methods", e.methods);
        eval_keys.bind(eval_cmd->add_option("--n-points", e.n_points, "Curve sample count"),
                       "n-points", e.n_points);
        eval_keys.bind(eval_cmd->add_option("--steps", e.steps, "Quadrature steps"), "steps",
                       e.steps);
        eval_keys.bind(eval_cmd->add_option("--rule", e.rule, "left-riemann | trapezoid"), "rule",
                       e.rule);
        eval_keys.bind(eval_cmd->add_option("--n-baselines", e.n_baselines, "Baselines per sample"),
                       "n-baselines", e.n_baselines);
        eval_keys.bind(eval_cmd->add_option("--alpha", e.alpha, "Fitness target ratio"), "alpha",
                       e.alpha);
        eval_keys.bind(eval_cmd->add_option("--epsilon", e.epsilon, "Fitness convergence band"),
                       "epsilon", e.epsilon);
        eval_keys.bind(eval_cmd->add_option("--max-iterations", e.max_iterations,
                                            "Fitness search iteration cap"),
                       "max-iterations", e.max_iterations);
        eval_keys.bind(eval_cmd->add_option("--neutral", e.neutral, "Masked-pixel value"), "neutral",
                       e.neutral);
        eval_keys.bind(eval_cmd->add_option("--neutral-mode", e.neutral_mode,
                                            "constant | dataset-mean (per-channel dataset mean)"),
                       "neutral-mode", e.neutral_mode);
        eval_cmd->add_flag("--strict-fitness", e.strict_fitness,
                           "Exclude non-converged baselines from the weighting");
        eval_keys.bind(eval_cmd->add_option("--seed", e.seed, "Random seed"), "seed", e.seed);
        eval_keys.bind(eval_cmd->add_option("--out", e.out, "Output directory")->required(), "out",
                       e.out);
        eval_cmd->add_option("--config", config_path, "JSON config with defaults");
    }

    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo checks of the weighting theory");
    {
        auto& s = simulate;
        sim_keys.bind(sim_cmd->add_option("--out", s.out, "Output directory")->required(), "out",
                      s.out);
        sim_keys.bind(sim_cmd->add_option("--worlds", s.worlds, "Worlds for the ordering check"),
                      "worlds", s.worlds);
        sim_keys.bind(sim_cmd->add_option("--trials", s.trials, "Monte Carlo trials per check"),
                      "trials", s.trials);
        sim_keys.bind(sim_cmd->add_option("--n", s.n, "Baselines per world"), "n", s.n);
        sim_keys.bind(sim_cmd->add_option("--d", s.d, "Features per world"), "d", s.d);
        sim_keys.bind(sim_cmd->add_option("--relevant-fraction", s.relevant_fraction,
                                          "Relevant feature fraction"),
                      "relevant-fraction", s.relevant_fraction);
        sim_keys.bind(sim_cmd->add_option("--spread", s.spread, "Relevance quality dispersion"),
                      "spread", s.spread);
        sim_keys.bind(sim_cmd->add_option("--m-grid", s.m_grid, "Sample sizes, comma list"),
                      "m-grid", s.m_grid);
        sim_keys.bind(sim_cmd->add_option("--delta-grid", s.delta_grid, "Margins, comma list"),
                      "delta-grid", s.delta_grid);
        sim_keys.bind(sim_cmd->add_option("--confidence-grid", s.confidence_grid,
                                          "Confidence parameters, comma list"),
                      "confidence-grid", s.confidence_grid);
        sim_keys.bind(sim_cmd->add_option("--seed", s.seed, "Random seed"), "seed", s.seed);
        sim_cmd->add_flag("--adversarial", s.adversarial,
                          "Generate assumption-violating worlds to confirm checker sensitivity");
        sim_cmd->add_option("--config", config_path, "JSON config with defaults");
    }

    auto* render_cmd = app.add_subcommand("render", "Render an attribution map as PGM");
    render_cmd->add_option("--attr", render.attr, "Attribution NTF")->required();
    render_cmd->add_option("--out", render.out, "Output PGM path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) {
            if (!config_path.empty()) gen_keys.apply(config_path);
            gen.cfg.seed = resolve_seed(gen.cfg.seed, gen_cmd->get_option("--seed"), gen_keys);
            return run_gen_data(gen);
        }
        if (train_cmd->parsed()) {
            if (!config_path.empty()) train_keys.apply(config_path);
            train.seed = resolve_seed(train.seed, train_cmd->get_option("--seed"), train_keys);
            return run_train(train);
        }
        if (attr_cmd->parsed()) {
            if (!config_path.empty()) attr_keys.apply(config_path);
            attribute.seed = resolve_seed(attribute.seed, attr_cmd->get_option("--seed"), attr_keys);
            return run_attribute(attribute);
        }
        if (eval_cmd->parsed()) {
            if (!config_path.empty()) eval_keys.apply(config_path);
            evaluate.seed = resolve_seed(evaluate.seed, eval_cmd->get_option("--seed"), eval_keys);
            return run_evaluate(evaluate);
        }
        if (sim_cmd->parsed()) {
            if (!config_path.empty()) sim_keys.apply(config_path);
            simulate.seed = resolve_seed(simulate.seed, sim_cmd->get_option("--seed"), sim_keys);
            return run_simulate(simulate);
        }
        if (render_cmd->parsed()) return run_render(render);
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
