#ifndef WIG_EVALUATION_HPP
#define WIG_EVALUATION_HPP

#include <cstddef>
#include <vector>

#include "wig/attribution.hpp"
#include "wig/fitness.hpp"
#include "wig/model.hpp"

namespace wig {

/// Sampled metric curve: values[i] is the metric at fraction (i+1)/N and
/// auc is their mean.
struct MetricCurve {
    std::vector<double> fractions;
    std::vector<double> values;
    double auc = 0.0;
};

struct GroundTruthMask {
    std::vector<bool> selected;  // one flag per pixel
    std::size_t size = 0;

    static GroundTruthMask from_tensor(const Tensor& t);  // nonzero = selected
};

/// Retained model score as the top round(p*d) pixels are masked,
/// p = 1/N .. 1. Lower AUC means the ranking found the influential pixels.
MetricCurve deletion_curve(const Model& model, const Tensor& x, const AttributionMap& attr,
                           std::size_t n_points, const NeutralPolicy& neutral);

double deletion_auc(const Model& model, const Tensor& x, const AttributionMap& attr,
                    std::size_t n_points, const NeutralPolicy& neutral);

/// Precision of the top ceil(p*|S|) ranked pixels against the ground-truth
/// set, p = 1/N .. 1. Higher AUC means tighter spatial alignment.
MetricCurve overlap_curve(const AttributionMap& attr, const GroundTruthMask& gt,
                          std::size_t n_points);

double overlap_auc(const AttributionMap& attr, const GroundTruthMask& gt, std::size_t n_points);

struct TTestResult {
    double t_statistic = 0.0;
    double p_value = 1.0;
};

/// Two-sided paired t-test on a-b. Zero variance with nonzero mean yields
/// p = 0; zero variance with zero mean throws ValueError("degenerate").
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Student-t distribution helpers used by the test (series/continued
// fraction, absolute accuracy ~1e-8).
double student_t_cdf(double t, std::size_t dof);
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace wig

#endif
