#pragma once

#include <string>
#include <vector>

#include "hsprobe/errors.hpp"

namespace hsprobe {

/// Exact ROC-AUC, equal to the Mann-Whitney statistic
/// P(score+ > score-) + 0.5 P(tie). Throws UndefinedMetricError unless both
/// classes are present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Area under the precision-recall curve using the average-precision step
/// rule over distinct-score thresholds (no trapezoidal interpolation).
double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct F1Sweep {
    double best_f1 = 0.0;
    double tau_star = 0.5;
    double f1_at_half = 0.0;
};

/// Evaluates F1 with prediction = (score >= tau) at every distinct score and
/// at tau = 0.5. Ties in F1 resolve toward the larger threshold; candidates
/// compare as exact integer rationals so rounding cannot flip a tie. F1 is
/// taken as 0 when precision and recall are both 0.
F1Sweep f1_sweep(const std::vector<double>& scores, const std::vector<int>& labels);

/// Fraction of samples with (score >= tau) == label.
double accuracy(const std::vector<double>& scores, const std::vector<int>& labels, double tau);

/// Expected calibration error over M equal-width bins on [0,1], right-closed
/// so that 1.0 lands in the last bin. acc(B) is the empirical positive rate,
/// conf(B) the mean score (confidence-for-positive-class convention). Empty
/// bins contribute nothing. Scores must lie in [0,1].
double ece(const std::vector<double>& scores, const std::vector<int>& labels, int bins);

/// All evaluation metrics for one scored split.
struct MetricsReport {
    double auc = 0.0;
    double pr_auc = 0.0;
    double acc = 0.0;           // at acc_threshold
    double acc_threshold = 0.5;
    double acc_at_tau_star = 0.0;
    double f1_at_half = 0.0;
    double best_f1 = 0.0;
    double tau_star = 0.5;
    double ece = 0.0;
    int bin_count = 10;
    int n = 0;

    std::string to_json() const;
    static MetricsReport from_json(const std::string& text);
};

/// Computes the full report (AUC, PR-AUC, acc at 0.5 and tau*, F1 sweep, ECE).
MetricsReport compute_report(const std::vector<double>& scores, const std::vector<int>& labels,
                             int bins = 10);

struct CurvePoint {
    double x = 0.0;  // FPR (ROC) or recall (PR)
    double y = 0.0;  // TPR (ROC) or precision (PR)
    double threshold = 0.0;
};

/// ROC curve points from (0,0) up to (1,1), thresholds descending.
std::vector<CurvePoint> roc_curve(const std::vector<double>& scores,
                                  const std::vector<int>& labels);

/// PR curve points across distinct thresholds, recall descending to 0.
std::vector<CurvePoint> pr_curve(const std::vector<double>& scores,
                                 const std::vector<int>& labels);

/// Writes curve points as CSV with header "x,y,threshold".
void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve);

}  // namespace hsprobe
