#include "wig/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "wig/error.hpp"
#include "wig/io.hpp"
#include "wig/parallel.hpp"

namespace wig {

MethodSpec MethodSpec::parse(const std::string& token) {
    MethodSpec spec;
    spec.token = token;
    if (token == "ig") {
        spec.method = AttributionMethod::IG;
    } else if (token == "eg") {
        spec.method = AttributionMethod::EG;
    } else if (token == "wg") {
        spec.method = AttributionMethod::WG;
    } else if (token.rfind("wg-filtered", 0) == 0) {
        spec.method = AttributionMethod::WG;
        spec.filtered = true;
        spec.remove_count = 1;
        const std::size_t colon = token.find(':');
        if (colon != std::string::npos) {
            const std::string digits = token.substr(colon + 1);
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(),
                                             spec.remove_count);
            if (ec != std::errc() || ptr != digits.data() + digits.size()) {
                throw ValueError("bad method token '" + token + "'");
            }
        } else if (token != "wg-filtered") {
            throw ValueError("bad method token '" + token + "'");
        }
    } else {
        throw ValueError("unknown method '" + token + "'");
    }
    return spec;
}

void EvalOptions::validate() const {
    if (methods.empty()) throw ValueError("no methods requested");
    if (n_baselines < 1) throw ValueError("need at least one baseline");
    quad.validate();
    fitness.validate();
    if (curve_points < 1) throw ValueError("curve needs at least one point");
}

namespace {

// Per-baseline IG maps once, shared by every method that needs them.
std::vector<AttributionMap> baseline_ig_maps(const Model& model, const Tensor& x,
                                             const BaselineSet& baselines,
                                             const PathQuadrature& quad) {
    std::vector<AttributionMap> maps;
    maps.reserve(baselines.size());
    for (std::size_t k = 0; k < baselines.size(); ++k) {
        maps.push_back(integrated_gradients(model, x, baselines.baselines[k], quad,
                                            baselines.id_of(k)));
    }
    return maps;
}

AttributionMap aggregate(const std::vector<AttributionMap>& maps, const std::vector<double>& coeffs,
                         AttributionMethod method, const PathQuadrature& quad) {
    const std::size_t pixels = maps.front().values.size();
    std::vector<double> out(pixels);
    std::vector<double> terms(maps.size());
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t k = 0; k < maps.size(); ++k) terms[k] = coeffs[k] * maps[k].values[p];
        out[p] = stable_sum(terms);
    }
    AttributionMap map;
    map.values = Tensor(maps.front().values.shape(), std::move(out));
    map.method = method;
    map.metadata.steps = quad.steps;
    map.metadata.rule = quad.rule;
    for (const auto& m : maps) {
        map.metadata.baseline_ids.push_back(m.metadata.baseline_ids.front());
    }
    if (method == AttributionMethod::WG) map.metadata.weights = coeffs;
    return map;
}

}  // namespace

MethodRun run_attribution_method(const Model& model, const Tensor& x, const BaselineSet& baselines,
                                 const MethodSpec& spec, const PathQuadrature& quad,
                                 const FitnessConfig& fitness, bool strict_fitness) {
    MethodRun run;
    if (spec.method == AttributionMethod::IG && !spec.filtered) {
        if (baselines.size() != 1) throw ValueError("ig needs exactly one baseline");
        run.attribution = integrated_gradients(model, x, baselines.baselines[0], quad,
                                               baselines.id_of(0));
        run.used_baselines = baselines;
        return run;
    }

    run.per_baseline = baseline_ig_maps(model, x, baselines, quad);

    if (spec.method == AttributionMethod::EG) {
        const double u = 1.0 / static_cast<double>(baselines.size());
        run.attribution = aggregate(run.per_baseline, std::vector<double>(baselines.size(), u),
                                    AttributionMethod::EG, quad);
        run.used_baselines = baselines;
        return run;
    }

    // Weighted variants: each baseline is scored by how well its own IG map
    // collapses the prediction.
    const double base_score = model.forward(x);
    run.fitness.resize(baselines.size());
    detail::parallel_for(baselines.size(), [&](std::size_t k) {
        run.fitness[k] = compute_d_alpha(model, x, run.per_baseline[k], fitness, base_score);
    });
    run.weights = fitness_weights(run.fitness, strict_fitness);

    if (!spec.filtered) {
        run.attribution = aggregate(run.per_baseline, run.weights, AttributionMethod::WG, quad);
        run.used_baselines = baselines;
        run.used_baselines.weights = run.weights;
        return run;
    }

    if (spec.remove_count >= baselines.size()) {
        throw ValueError("remove_count must leave at least one baseline");
    }
    const auto kept = surviving_indices(run.fitness, spec.remove_count);
    std::vector<AttributionMap> kept_maps;
    std::vector<FitnessResult> kept_results;
    BaselineSet kept_set;
    for (std::size_t i : kept) {
        kept_maps.push_back(run.per_baseline[i]);
        kept_results.push_back(run.fitness[i]);
        kept_set.baselines.push_back(baselines.baselines[i]);
        kept_set.ids.push_back(baselines.id_of(i));
    }
    kept_set.weights = fitness_weights(kept_results, strict_fitness);
    run.attribution = aggregate(kept_maps, kept_set.weights, AttributionMethod::WG, quad);
    run.used_baselines = std::move(kept_set);
    return run;
}

std::vector<double> EvalOutcome::deletion_by_method(const std::string& token) const {
    std::vector<double> out;
    for (const auto& row : rows) {
        if (row.method == token) out.push_back(row.deletion_auc);
    }
    return out;
}

std::vector<double> EvalOutcome::overlap_by_method(const std::string& token) const {
    std::vector<double> out;
    for (const auto& row : rows) {
        if (row.method == token && row.overlap_auc) out.push_back(*row.overlap_auc);
    }
    return out;
}

EvalOutcome evaluate_dataset(const Model& model, const std::vector<EvalSample>& samples,
                             const EvalOptions& options) {
    options.validate();
    if (samples.empty()) throw ValueError("no samples to evaluate");

    const std::size_t n_methods = options.methods.size();
    EvalOutcome outcome;
    outcome.rows.resize(samples.size() * n_methods);

    bool any_gt = false;
    for (const auto& s : samples) any_gt = any_gt || s.ground_truth.has_value();
    outcome.has_overlap = any_gt;

    bool needs_baselines = false;
    for (const MethodSpec& m : options.methods) {
        needs_baselines = needs_baselines || m.method != AttributionMethod::IG || m.filtered;
    }
    if (needs_baselines && samples.size() < 2) {
        throw ValueError("dataset too small to sample baselines");
    }

    detail::parallel_for(samples.size(), [&](std::size_t s) {
        const EvalSample& sample = samples[s];
        const Model scored = model.with_class_index(model.predict(sample.image));

        // Baselines drawn from the other dataset images, per-sample seed.
        Rng rng = Rng(options.seed).derive(s);
        BaselineSet baselines;
        if (samples.size() > 1) {
            std::vector<std::size_t> pool;
            pool.reserve(samples.size() - 1);
            for (std::size_t i = 0; i < samples.size(); ++i) {
                if (i != s) pool.push_back(i);
            }
            const std::size_t take = std::min<std::size_t>(options.n_baselines, pool.size());
            for (std::size_t i = 0; i < take; ++i) {
                const std::size_t j = i + rng.below(pool.size() - i);
                std::swap(pool[i], pool[j]);
                baselines.baselines.push_back(samples[pool[i]].image);
                baselines.ids.push_back(samples[pool[i]].id);
            }
        }

        for (std::size_t mi = 0; mi < n_methods; ++mi) {
            const MethodSpec& spec = options.methods[mi];
            AttributionMap attr;
            if (spec.method == AttributionMethod::IG && !spec.filtered) {
                // Plain IG scores against the neutral reference image.
                Tensor neutral_baseline(sample.image.shape());
                const std::size_t channels = channel_count(sample.image.shape());
                const std::size_t pixels = pixel_count(sample.image.shape());
                for (std::size_t c = 0; c < channels; ++c) {
                    const double v = options.fitness.neutral.value_for_channel(c);
                    for (std::size_t p = 0; p < pixels; ++p) {
                        neutral_baseline[c * pixels + p] = v;
                    }
                }
                attr = integrated_gradients(scored, sample.image, neutral_baseline, options.quad,
                                            "neutral");
            } else {
                if (baselines.size() == 0) throw ValueError("dataset too small to sample baselines");
                attr = run_attribution_method(scored, sample.image, baselines, spec, options.quad,
                                              options.fitness, options.strict_fitness)
                           .attribution;
            }

            SampleScore& row = outcome.rows[s * n_methods + mi];
            row.sample_id = sample.id;
            row.method = spec.token;
            row.deletion_auc = deletion_auc(scored, sample.image, attr, options.curve_points,
                                            options.fitness.neutral);
            if (sample.ground_truth) {
                row.overlap_auc = overlap_auc(attr, *sample.ground_truth, options.curve_points);
            }
        }
    });
    return outcome;
}

namespace {

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : stable_sum(v) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
    return std::sqrt(stable_sum(sq) / static_cast<double>(v.size() - 1));
}

std::string p_value_field(const std::vector<double>& ref, const std::vector<double>& values) {
    try {
        return format_double(paired_t_test(values, ref).p_value);
    } catch (const ValueError&) {
        return "degenerate";
    }
}

}  // namespace

std::vector<std::vector<std::string>> summarize_outcome(const EvalOutcome& outcome,
                                                        const std::vector<MethodSpec>& methods) {
    const bool compare = methods.size() > 1;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header = {"metric", "method", "mean", "std"};
    if (compare) {
        header.push_back("rel_improvement_pct");
        header.push_back("p_value");
    }
    rows.push_back(header);

    struct MetricDef {
        std::string name;
        bool higher_better;
    };
    std::vector<MetricDef> metrics = {{"deletion_auc", false}};
    if (outcome.has_overlap) metrics.push_back({"overlap_auc", true});

    for (const MetricDef& metric : metrics) {
        auto values_for = [&](const std::string& token) {
            return metric.name == "deletion_auc" ? outcome.deletion_by_method(token)
                                                 : outcome.overlap_by_method(token);
        };
        const std::vector<double> ref = values_for(methods.front().token);
        const double ref_mean = mean_of(ref);
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const std::vector<double> vals = values_for(methods[mi].token);
            std::vector<std::string> row = {metric.name, methods[mi].token,
                                            format_double(mean_of(vals)), format_double(std_of(vals))};
            if (compare) {
                if (mi == 0) {
                    row.push_back("");
                    row.push_back("");
                } else {
                    const double m = mean_of(vals);
                    const double gain = metric.higher_better ? (m - ref_mean) / ref_mean * 100.0
                                                             : (ref_mean - m) / ref_mean * 100.0;
                    row.push_back(format_double(gain));
                    row.push_back(p_value_field(ref, vals));
                }
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace wig
