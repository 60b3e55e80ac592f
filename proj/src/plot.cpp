#include "hsprobe/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hsprobe {

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 360.0;
constexpr double kMargin = 56.0;
constexpr double kPlotW = kWidth - 2.0 * kMargin;
constexpr double kPlotH = kHeight - 2.0 * kMargin;

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

std::ofstream open_svg(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("plot: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return out;
}

void draw_frame(std::ofstream& out, const std::string& title, const std::string& xlabel,
                const std::string& ylabel) {
    out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kPlotW
        << "\" height=\"" << kPlotH << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kMargin / 2
        << "\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
        << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
    out << "<text x=\"14\" y=\"" << kHeight / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
        << kHeight / 2 << ")\">" << ylabel << "</text>\n";
}

double map_x(double x01) { return kMargin + x01 * kPlotW; }
double map_y(double y01) { return kMargin + (1.0 - y01) * kPlotH; }

void draw_unit_ticks(std::ofstream& out) {
    for (int i = 0; i <= 4; ++i) {
        const double v = i / 4.0;
        out << "<text x=\"" << map_x(v) << "\" y=\"" << kHeight - kMargin + 16
            << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(v) << "</text>\n";
        out << "<text x=\"" << kMargin - 8 << "\" y=\"" << map_y(v) + 3
            << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(v) << "</text>\n";
    }
}

}  // namespace

void write_curve_svg(const std::string& path, const std::vector<CurvePoint>& curve,
                     const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, bool diagonal) {
    if (curve.empty()) throw DataError("write_curve_svg: empty curve");
    std::ofstream out = open_svg(path);
    draw_frame(out, title, xlabel, ylabel);
    draw_unit_ticks(out);
    if (diagonal)
        out << "<line x1=\"" << map_x(0) << "\" y1=\"" << map_y(0) << "\" x2=\"" << map_x(1)
            << "\" y2=\"" << map_y(1) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : curve) out << fmt(map_x(p.x)) << "," << fmt(map_y(p.y)) << " ";
    out << "\"/>\n</svg>\n";
}

void write_roc_svg(const std::string& path, const std::vector<CurvePoint>& curve) {
    write_curve_svg(path, curve, "ROC curve", "false positive rate", "true positive rate", true);
}

void write_pr_svg(const std::string& path, const std::vector<CurvePoint>& curve) {
    write_curve_svg(path, curve, "Precision-recall curve", "recall", "precision", false);
}

void write_logit_histogram_svg(const std::string& path, const std::vector<double>& scores,
                               const std::vector<int>& labels, int bins) {
    if (scores.empty() || scores.size() != labels.size())
        throw DataError("write_logit_histogram_svg: scores and labels must align");
    if (bins < 1) throw ConfigError("write_logit_histogram_svg: bins must be >= 1");

    std::vector<double> logits;
    logits.reserve(scores.size());
    for (const double s : scores) {
        const double p = std::clamp(s, 1e-7, 1.0 - 1e-7);
        logits.push_back(std::log(p / (1.0 - p)));
    }
    double lo = *std::min_element(logits.begin(), logits.end());
    double hi = *std::max_element(logits.begin(), logits.end());
    if (lo == hi) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double width = (hi - lo) / bins;

    std::vector<std::vector<int>> counts(2, std::vector<int>(static_cast<std::size_t>(bins), 0));
    for (std::size_t i = 0; i < logits.size(); ++i) {
        int b = static_cast<int>((logits[i] - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        ++counts[labels[i] == 1 ? 1 : 0][static_cast<std::size_t>(b)];
    }
    int peak = 1;
    for (const auto& row : counts)
        for (const int c : row) peak = std::max(peak, c);

    std::ofstream out = open_svg(path);
    draw_frame(out, "Predicted logit distribution", "logit", "count");
    const char* fills[2] = {"steelblue", "tomato"};
    for (int cls = 0; cls < 2; ++cls)
        for (int b = 0; b < bins; ++b) {
            const int c = counts[static_cast<std::size_t>(cls)][static_cast<std::size_t>(b)];
            if (c == 0) continue;
            const double x = kMargin + (static_cast<double>(b) / bins) * kPlotW;
            const double h = (static_cast<double>(c) / peak) * kPlotH;
            out << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(kMargin + kPlotH - h)
                << "\" width=\"" << fmt(kPlotW / bins) << "\" height=\"" << fmt(h)
                << "\" fill=\"" << fills[cls] << "\" fill-opacity=\"0.55\"/>\n";
        }
    // Axis annotations: logit range at the corners.
    out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(lo) << "</text>\n";
    out << "<text x=\"" << kMargin + kPlotW << "\" y=\"" << kHeight - kMargin + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(hi) << "</text>\n";
    out << "</svg>\n";
}

}  // namespace hsprobe
