#include "wig/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "wig/error.hpp"
#include "wig/io.hpp"

namespace wig {

NeutralPolicy NeutralPolicy::constant_value(double v) {
    NeutralPolicy n;
    n.kind = Kind::Constant;
    n.constant = v;
    return n;
}

NeutralPolicy NeutralPolicy::per_channel(std::vector<double> values) {
    if (values.empty()) throw ValueError("per-channel neutral needs at least one value");
    NeutralPolicy n;
    n.kind = Kind::PerChannel;
    n.channel_values = std::move(values);
    return n;
}

NeutralPolicy NeutralPolicy::dataset_mean(const std::vector<Tensor>& images) {
    if (images.empty()) throw ValueError("dataset mean needs at least one image");
    const auto& shape = images.front().shape();
    const std::size_t channels = channel_count(shape);
    const std::size_t pixels = pixel_count(shape);
    std::vector<double> means(channels);
    std::vector<double> values;
    values.reserve(images.size() * pixels);
    for (std::size_t c = 0; c < channels; ++c) {
        values.clear();
        for (const Tensor& img : images) {
            if (img.shape() != shape) throw ValueError("dataset images differ in shape");
            for (std::size_t p = 0; p < pixels; ++p) {
                values.push_back(img[scalar_index(shape, c, p)]);
            }
        }
        means[c] = stable_sum(values) / static_cast<double>(values.size());
    }
    return per_channel(std::move(means));
}

double NeutralPolicy::value_for_channel(std::size_t c) const {
    if (kind == Kind::Constant) return constant;
    if (c >= channel_values.size()) throw ValueError("neutral policy has no value for channel");
    return channel_values[c];
}

void FitnessConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValueError("alpha must lie in (0,1)");
    if (!(epsilon > 0.0)) throw ValueError("epsilon must be positive");
    if (max_iterations < 1) throw ValueError("max_iterations must be at least 1");
}

Mask find_mask(const AttributionMap& attr, std::size_t k) {
    const std::size_t pixels = attr.values.size();
    if (k > pixels) throw ValueError("mask size exceeds pixel count");
    Mask mask;
    mask.selected.assign(pixels, false);
    mask.size = k;
    const auto order = argsort_desc(attr.values.data());
    for (std::size_t i = 0; i < k; ++i) mask.selected[order[i]] = true;
    return mask;
}

Tensor apply_mask(const Tensor& x, const Mask& mask, const NeutralPolicy& neutral) {
    const std::size_t pixels = pixel_count(x.shape());
    if (mask.selected.size() != pixels) {
        throw ValueError("mask covers " + std::to_string(mask.selected.size()) + " pixels, input has " +
                         std::to_string(pixels));
    }
    const std::size_t channels = channel_count(x.shape());
    Tensor out = x;
    for (std::size_t p = 0; p < pixels; ++p) {
        if (!mask.selected[p]) continue;
        for (std::size_t c = 0; c < channels; ++c) {
            out[scalar_index(x.shape(), c, p)] = neutral.value_for_channel(c);
        }
    }
    return out;
}

namespace {

void check_attr_shape(const Tensor& x, const AttributionMap& attr) {
    if (attr.values.size() != pixel_count(x.shape())) {
        throw ValueError("attribution covers " + std::to_string(attr.values.size()) +
                         " pixels, input has " + std::to_string(pixel_count(x.shape())));
    }
}

double resolve_base_score(const Model& model, const Tensor& x, std::optional<double> base_score) {
    const double fx = base_score ? *base_score : model.forward(x);
    if (!(fx > 0.0)) throw ValueError("non-positive base score");
    return fx;
}

// Masking the top-k prefix is cheaper through the precomputed ranking than
// through find_mask; identical selection by construction.
Tensor mask_top_k(const Tensor& x, const std::vector<std::size_t>& order, std::size_t k,
                  const NeutralPolicy& neutral) {
    const std::size_t channels = channel_count(x.shape());
    Tensor out = x;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
            out[scalar_index(x.shape(), c, order[i])] = neutral.value_for_channel(c);
        }
    }
    return out;
}

}  // namespace

FitnessResult compute_d_alpha(const Model& model, const Tensor& x, const AttributionMap& attr,
                              const FitnessConfig& cfg, std::optional<double> base_score) {
    cfg.validate();
    check_attr_shape(x, attr);
    const double target = cfg.alpha * resolve_base_score(model, x, base_score);
    const auto order = argsort_desc(attr.values.data());

    std::size_t low = 0;
    std::size_t high = pixel_count(x.shape());
    std::size_t mid = high;
    FitnessResult result;
    while (low <= high && result.iterations_used < cfg.max_iterations) {
        mid = (low + high) / 2;
        const double score = model.forward(mask_top_k(x, order, mid, cfg.neutral));
        ++result.iterations_used;
        result.final_score = score;
        if (std::abs(score - target) < cfg.epsilon) {
            result.d_alpha = mid;
            result.converged = true;
            return result;
        }
        if (score > target) {
            low = mid + 1;  // score still too high, mask more
        } else {
            if (mid == 0) break;  // unsigned guard; k below zero is meaningless
            high = mid - 1;  // overshot the target, mask fewer
        }
    }
    result.d_alpha = mid;
    result.converged = false;
    return result;
}

FitnessResult compute_d_alpha_oracle(const Model& model, const Tensor& x,
                                     const AttributionMap& attr, const FitnessConfig& cfg,
                                     std::optional<double> base_score) {
    cfg.validate();
    check_attr_shape(x, attr);
    const double target = cfg.alpha * resolve_base_score(model, x, base_score);
    const auto order = argsort_desc(attr.values.data());
    const std::size_t pixels = pixel_count(x.shape());

    FitnessResult result;
    std::optional<std::size_t> first_below;
    double first_below_score = 0.0;
    for (std::size_t k = 0; k <= pixels; ++k) {
        const double score = model.forward(mask_top_k(x, order, k, cfg.neutral));
        ++result.iterations_used;
        if (std::abs(score - target) < cfg.epsilon) {
            result.d_alpha = k;
            result.converged = true;
            result.final_score = score;
            return result;
        }
        if (!first_below && score < target) {
            first_below = k;
            first_below_score = score;
        }
    }
    if (first_below) {
        result.d_alpha = *first_below;
        result.final_score = first_below_score;
    } else {
        // Score never drops to the target; full mask is the best effort.
        result.d_alpha = pixels;
        result.final_score = model.forward(mask_top_k(x, order, pixels, cfg.neutral));
    }
    result.converged = false;
    return result;
}

std::vector<double> fitness_weights(const std::vector<FitnessResult>& results,
                                    bool strict_exclude_nonconverged) {
    if (results.empty()) throw ValueError("no fitness results");
    std::vector<double> inv(results.size());
    for (std::size_t k = 0; k < results.size(); ++k) {
        if (strict_exclude_nonconverged && !results[k].converged) {
            inv[k] = 0.0;
        } else {
            inv[k] = 1.0 / static_cast<double>(std::max<std::size_t>(results[k].d_alpha, 1));
        }
    }
    const double total = stable_sum(inv);
    if (total <= 0.0) throw ValueError("no converged fitness results in strict mode");
    for (double& w : inv) w /= total;
    return inv;
}

std::vector<std::size_t> surviving_indices(const std::vector<FitnessResult>& results,
                                           std::size_t remove_count) {
    if (remove_count >= results.size()) throw ValueError("cannot remove every baseline");
    std::vector<std::size_t> order(results.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // Worst fitness first; ties drop the higher original index.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (results[a].d_alpha != results[b].d_alpha) return results[a].d_alpha > results[b].d_alpha;
        return a > b;
    });
    std::vector<bool> removed(results.size(), false);
    for (std::size_t i = 0; i < remove_count; ++i) removed[order[i]] = true;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!removed[i]) kept.push_back(i);
    }
    return kept;
}

BaselineSet filter_baselines(const BaselineSet& baselines,
                             const std::vector<FitnessResult>& results, std::size_t remove_count) {
    if (results.size() != baselines.size()) throw ValueError("fitness result count mismatch");
    const auto kept = surviving_indices(results, remove_count);

    BaselineSet out;
    std::vector<FitnessResult> kept_results;
    for (std::size_t i : kept) {
        out.baselines.push_back(baselines.baselines[i]);
        out.ids.push_back(baselines.id_of(i));
        kept_results.push_back(results[i]);
    }
    out.weights = fitness_weights(kept_results);
    return out;
}

void write_fitness_report(const std::filesystem::path& path, const BaselineSet& baselines,
                          const std::vector<FitnessResult>& results,
                          const std::vector<double>& weights) {
    if (results.size() != baselines.size() || weights.size() != baselines.size()) {
        throw ValueError("fitness report size mismatch");
    }
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"baseline_id", "d_alpha", "converged", "final_score", "iterations", "weight"});
    for (std::size_t k = 0; k < results.size(); ++k) {
        rows.push_back({baselines.id_of(k), std::to_string(results[k].d_alpha),
                        results[k].converged ? "true" : "false", format_double(results[k].final_score),
                        std::to_string(results[k].iterations_used), format_double(weights[k])});
    }
    write_csv(path, rows);
}

}  // namespace wig
