#include "wig/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wig/error.hpp"
#include "wig/parallel.hpp"

namespace wig {

GroundTruthMask GroundTruthMask::from_tensor(const Tensor& t) {
    GroundTruthMask gt;
    gt.selected.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const bool on = t[i] != 0.0;
        gt.selected.push_back(on);
        if (on) ++gt.size;
    }
    if (gt.size == 0) throw ValueError("ground-truth mask is empty");
    return gt;
}

namespace {

// Round half up, matching the top-p% pixel counts used throughout.
std::size_t round_pixels(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

Tensor masked_top_k(const Tensor& x, const std::vector<std::size_t>& order, std::size_t k,
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

MetricCurve deletion_curve(const Model& model, const Tensor& x, const AttributionMap& attr,
                           std::size_t n_points, const NeutralPolicy& neutral) {
    if (n_points < 1) throw ValueError("curve needs at least one point");
    const std::size_t pixels = pixel_count(x.shape());
    if (attr.values.size() != pixels) {
        throw ValueError("attribution covers " + std::to_string(attr.values.size()) +
                         " pixels, input has " + std::to_string(pixels));
    }
    const auto order = argsort_desc(attr.values.data());

    MetricCurve curve;
    curve.fractions.resize(n_points);
    curve.values.resize(n_points);
    detail::parallel_for(n_points, [&](std::size_t i) {
        const double p = static_cast<double>(i + 1) / static_cast<double>(n_points);
        const std::size_t k = round_pixels(p * static_cast<double>(pixels));
        curve.fractions[i] = p;
        curve.values[i] = model.forward(masked_top_k(x, order, k, neutral));
    });
    curve.auc = stable_sum(curve.values) / static_cast<double>(n_points);
    return curve;
}

double deletion_auc(const Model& model, const Tensor& x, const AttributionMap& attr,
                    std::size_t n_points, const NeutralPolicy& neutral) {
    return deletion_curve(model, x, attr, n_points, neutral).auc;
}

MetricCurve overlap_curve(const AttributionMap& attr, const GroundTruthMask& gt,
                          std::size_t n_points) {
    if (n_points < 1) throw ValueError("curve needs at least one point");
    const std::size_t pixels = attr.values.size();
    if (gt.selected.size() != pixels) {
        throw ValueError("ground truth covers " + std::to_string(gt.selected.size()) +
                         " pixels, attribution has " + std::to_string(pixels));
    }
    if (gt.size == 0) throw ValueError("ground-truth mask is empty");

    const auto order = argsort_desc(attr.values.data());
    // hits[k] = |top-k ∩ S|
    std::vector<std::size_t> hits(pixels + 1, 0);
    for (std::size_t i = 0; i < pixels; ++i) {
        hits[i + 1] = hits[i] + (gt.selected[order[i]] ? 1 : 0);
    }

    MetricCurve curve;
    curve.fractions.resize(n_points);
    curve.values.resize(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        const double p = static_cast<double>(i + 1) / static_cast<double>(n_points);
        // ceil keeps at least one pixel selected at every sampled p.
        const auto top = static_cast<std::size_t>(std::ceil(p * static_cast<double>(gt.size) - 1e-9));
        const std::size_t realized = std::max<std::size_t>(top, 1);
        curve.fractions[i] = p;
        curve.values[i] = static_cast<double>(hits[realized]) / static_cast<double>(realized);
    }
    curve.auc = stable_sum(curve.values) / static_cast<double>(n_points);
    return curve;
}

double overlap_auc(const AttributionMap& attr, const GroundTruthMask& gt, std::size_t n_points) {
    return overlap_curve(attr, gt, n_points).auc;
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw ValueError("incomplete beta needs x in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    // Continued fraction (modified Lentz), from the standard expansion of
    // I_x(a,b); converges quickly once x < (a+1)/(a+b+2).
    const auto betacf = [](double aa, double bb, double xx) {
        constexpr int kMaxIter = 500;
        constexpr double kEps = 1e-15;
        constexpr double kTiny = 1e-300;
        const double qab = aa + bb;
        const double qap = aa + 1.0;
        const double qam = aa - 1.0;
        double c = 1.0;
        double d = 1.0 - qab * xx / qap;
        if (std::abs(d) < kTiny) d = kTiny;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= kMaxIter; ++m) {
            const double m2 = 2.0 * m;
            double num = m * (bb - m) * xx / ((qam + m2) * (aa + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < kTiny) d = kTiny;
            c = 1.0 + num / c;
            if (std::abs(c) < kTiny) c = kTiny;
            d = 1.0 / d;
            h *= d * c;
            num = -(aa + m) * (qab + m) * xx / ((aa + m2) * (qap + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < kTiny) d = kTiny;
            c = 1.0 + num / c;
            if (std::abs(c) < kTiny) c = kTiny;
            d = 1.0 / d;
            const double del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < kEps) break;
        }
        return h;
    };

    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                          b * std::log1p(-x) + a * std::log(x)) *
                     betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, std::size_t dof) {
    if (dof < 1) throw ValueError("t distribution needs at least one degree of freedom");
    const double v = static_cast<double>(dof);
    const double x = v / (v + t * t);
    const double half_tail = 0.5 * regularized_incomplete_beta(0.5 * v, 0.5, x);
    return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValueError("paired t-test needs equal lengths");
    const std::size_t n = a.size();
    if (n < 2) throw ValueError("paired t-test needs at least two pairs");

    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
    const double mean = stable_sum(diff) / static_cast<double>(n);

    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = diff[i] - mean;
        sq[i] = d * d;
    }
    const double var = stable_sum(sq) / static_cast<double>(n - 1);

    TTestResult r;
    if (var == 0.0) {
        if (mean == 0.0) throw ValueError("degenerate");
        r.t_statistic = mean > 0.0 ? std::numeric_limits<double>::infinity()
                                   : -std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        return r;
    }
    r.t_statistic = mean / std::sqrt(var / static_cast<double>(n));
    r.p_value = 2.0 * (1.0 - student_t_cdf(std::abs(r.t_statistic), n - 1));
    return r;
}

}  // namespace wig
