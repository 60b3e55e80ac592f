#include "hsprobe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

namespace hsprobe {

namespace {

void check_sizes(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw DataError("metrics: scores and labels differ in length");
    if (scores.empty()) throw DataError("metrics: empty input");
    for (int y : labels)
        if (y != 0 && y != 1) throw DataError("metrics: labels must be 0 or 1");
}

std::pair<std::size_t, std::size_t> class_counts(const std::vector<int>& labels) {
    std::size_t pos = 0;
    for (int y : labels) pos += (y == 1);
    return {labels.size() - pos, pos};
}

// Indices sorted by score descending; equal scores keep input order.
std::vector<std::size_t> order_desc(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    const double denom = 2.0 * tp + fp + fn;
    if (denom == 0.0) return 0.0;
    return 2.0 * tp / denom;
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_sizes(scores, labels);
    auto [n0, n1] = class_counts(labels);
    if (n0 == 0 || n1 == 0)
        throw UndefinedMetricError("roc_auc: needs both classes present");

    // Midrank formulation of the Mann-Whitney statistic.
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]] == 1) rank_sum_pos += midrank;
        i = j;
    }
    const double u = rank_sum_pos - static_cast<double>(n1) * (n1 + 1) / 2.0;
    return u / (static_cast<double>(n0) * static_cast<double>(n1));
}

double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_sizes(scores, labels);
    auto [n0, n1] = class_counts(labels);
    (void)n0;
    if (n1 == 0) throw UndefinedMetricError("pr_auc: no positive labels");

    const auto idx = order_desc(scores);
    double ap = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        std::size_t tp_add = 0, fp_add = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            if (labels[idx[j]] == 1) ++tp_add;
            else ++fp_add;
            ++j;
        }
        tp += tp_add;
        fp += fp_add;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall_step = static_cast<double>(tp_add) / static_cast<double>(n1);
        ap += recall_step * precision;
        i = j;
    }
    return ap;
}

F1Sweep f1_sweep(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_sizes(scores, labels);
    auto [n0, n1] = class_counts(labels);
    (void)n0;
    if (n1 == 0) throw UndefinedMetricError("f1_sweep: no positive labels");

    struct Counts {
        std::uint64_t tp = 0, fp = 0, fn = 0;
        // F1 as an exact rational: tp / (tp + (fp+fn)/2), kept as
        // tp : (2tp+fp+fn) so that ties are decided without rounding.
        std::uint64_t num() const { return tp; }
        std::uint64_t den() const { return 2 * tp + fp + fn; }
    };
    auto counts_at = [&](double tau) {
        Counts c;
        for (std::size_t k = 0; k < scores.size(); ++k) {
            const bool pred = scores[k] >= tau;
            if (pred && labels[k] == 1) ++c.tp;
            else if (pred) ++c.fp;
            else if (labels[k] == 1) ++c.fn;
        }
        return c;
    };

    std::vector<double> thresholds = scores;
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    // den() is always positive: a positive label lands in tp or fn.
    Counts best = counts_at(0.5);
    double tau_star = 0.5;
    const double f1_at_half = f1_from_counts(best.tp, best.fp, best.fn);
    for (double tau : thresholds) {
        const Counts c = counts_at(tau);
        const auto lhs = c.num() * best.den();
        const auto rhs = best.num() * c.den();
        if (lhs > rhs || (lhs == rhs && tau > tau_star)) {
            best = c;
            tau_star = tau;
        }
    }

    F1Sweep out;
    out.best_f1 = f1_from_counts(best.tp, best.fp, best.fn);
    out.tau_star = tau_star;
    out.f1_at_half = f1_at_half;
    return out;
}

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels, double tau) {
    check_sizes(scores, labels);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < scores.size(); ++k)
        hits += ((scores[k] >= tau) ? 1 : 0) == labels[k];
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double ece(const std::vector<double>& scores, const std::vector<int>& labels, int bins) {
    check_sizes(scores, labels);
    if (bins < 1) throw ConfigError("ece: bin count must be >= 1");
    for (double s : scores)
        if (!(s >= 0.0 && s <= 1.0)) throw DataError("ece: scores must lie in [0,1]");

    std::vector<double> conf_sum(bins, 0.0);
    std::vector<std::size_t> pos(bins, 0), count(bins, 0);
    for (std::size_t k = 0; k < scores.size(); ++k) {
        // Right-closed bins: ((m-1)/M, m/M], with 0 in the first bin.
        int b = scores[k] <= 0.0
                    ? 0
                    : static_cast<int>(std::ceil(scores[k] * bins)) - 1;
        b = std::clamp(b, 0, bins - 1);
        conf_sum[b] += scores[k];
        pos[b] += labels[k];
        ++count[b];
    }
    double total = 0.0;
    for (int b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        const double acc_b = static_cast<double>(pos[b]) / count[b];
        const double conf_b = conf_sum[b] / count[b];
        total += (static_cast<double>(count[b]) / scores.size()) * std::abs(acc_b - conf_b);
    }
    return total;
}

MetricsReport compute_report(const std::vector<double>& scores, const std::vector<int>& labels,
                             int bins) {
    MetricsReport r;
    r.n = static_cast<int>(scores.size());
    r.bin_count = bins;
    r.auc = roc_auc(scores, labels);
    r.pr_auc = hsprobe::pr_auc(scores, labels);
    const auto sweep = f1_sweep(scores, labels);
    r.f1_at_half = sweep.f1_at_half;
    r.best_f1 = sweep.best_f1;
    r.tau_star = sweep.tau_star;
    r.acc_threshold = 0.5;
    r.acc = accuracy(scores, labels, 0.5);
    r.acc_at_tau_star = accuracy(scores, labels, r.tau_star);
    r.ece = ece(scores, labels, bins);
    return r;
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["auc"] = auc;
    j["pr_auc"] = pr_auc;
    j["acc"] = acc;
    j["acc_threshold"] = acc_threshold;
    j["acc_at_tau_star"] = acc_at_tau_star;
    j["f1_at_half"] = f1_at_half;
    j["best_f1"] = best_f1;
    j["tau_star"] = tau_star;
    j["ece"] = ece;
    j["bins"] = bin_count;
    j["n"] = n;
    return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.auc = j.at("auc").get<double>();
    r.pr_auc = j.at("pr_auc").get<double>();
    r.acc = j.at("acc").get<double>();
    r.acc_threshold = j.at("acc_threshold").get<double>();
    r.acc_at_tau_star = j.at("acc_at_tau_star").get<double>();
    r.f1_at_half = j.at("f1_at_half").get<double>();
    r.best_f1 = j.at("best_f1").get<double>();
    r.tau_star = j.at("tau_star").get<double>();
    r.ece = j.at("ece").get<double>();
    r.bin_count = j.at("bins").get<int>();
    r.n = j.at("n").get<int>();
    return r;
}

std::vector<CurvePoint> roc_curve(const std::vector<double>& scores,
                                  const std::vector<int>& labels) {
    check_sizes(scores, labels);
    auto [n0, n1] = class_counts(labels);
    if (n0 == 0 || n1 == 0) throw UndefinedMetricError("roc_curve: needs both classes");

    const auto idx = order_desc(scores);
    std::vector<CurvePoint> out;
    out.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            if (labels[idx[j]] == 1) ++tp;
            else ++fp;
            ++j;
        }
        out.push_back({static_cast<double>(fp) / n0, static_cast<double>(tp) / n1,
                       scores[idx[i]]});
        i = j;
    }
    return out;
}

std::vector<CurvePoint> pr_curve(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
    check_sizes(scores, labels);
    auto [n0, n1] = class_counts(labels);
    (void)n0;
    if (n1 == 0) throw UndefinedMetricError("pr_curve: no positive labels");

    const auto idx = order_desc(scores);
    std::vector<CurvePoint> out;
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            if (labels[idx[j]] == 1) ++tp;
            else ++fp;
            ++j;
        }
        out.push_back({static_cast<double>(tp) / n1,
                       static_cast<double>(tp) / static_cast<double>(tp + fp),
                       scores[idx[i]]});
        i = j;
    }
    return out;
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write curve CSV: " + path);
    out << "x,y,threshold\n";
    out.precision(17);
    for (const auto& p : curve) out << p.x << "," << p.y << "," << p.threshold << "\n";
}

}  // namespace hsprobe
