#pragma once

#include <string>
#include <vector>

#include "hsprobe/metrics.hpp"

namespace hsprobe {

/// Static SVG line chart of a curve on the unit square (axes 0..1, ticks at
/// 0.25 steps). `diagonal` draws the chance line, the ROC convention.
void write_curve_svg(const std::string& path, const std::vector<CurvePoint>& curve,
                     const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, bool diagonal);

void write_roc_svg(const std::string& path, const std::vector<CurvePoint>& curve);
void write_pr_svg(const std::string& path, const std::vector<CurvePoint>& curve);

/// Two-class histogram of predicted logits log(p/(1-p)) (scores clamped to
/// (0,1) at 1e-7). One translucent series per class.
void write_logit_histogram_svg(const std::string& path, const std::vector<double>& scores,
                               const std::vector<int>& labels, int bins);

}  // namespace hsprobe
