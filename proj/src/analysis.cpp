#include "hsprobe/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <Eigen/Eigenvalues>

#include "hsprobe/labeling.hpp"
#include "hsprobe/text.hpp"

namespace hsprobe {

namespace {

using Mat = MatX<double>;

}  // namespace

std::string to_string(BaselineMethod m) {
    switch (m) {
        case BaselineMethod::cosine_max: return "cosine_max";
        case BaselineMethod::mean_similarity: return "mean_similarity";
        case BaselineMethod::softmax_similarity: return "softmax_similarity";
        case BaselineMethod::token_f1: return "token_f1";
    }
    throw ConfigError("to_string: unknown baseline method");
}

BaselineMethod baseline_method_from_string(const std::string& s) {
    if (s == "cosine_max") return BaselineMethod::cosine_max;
    if (s == "mean_similarity") return BaselineMethod::mean_similarity;
    if (s == "softmax_similarity") return BaselineMethod::softmax_similarity;
    if (s == "token_f1") return BaselineMethod::token_f1;
    throw ConfigError("baseline_method_from_string: unknown method '" + s + "'");
}

std::vector<double> answer_similarities(std::string_view response,
                                        const std::vector<std::string>& answers,
                                        const EmbeddingBackend& backend) {
    if (answers.empty()) throw DataError("answer_similarities: empty answer list");
    const VecX<float> g = backend.embed(response);
    std::vector<double> out;
    out.reserve(answers.size());
    for (const auto& a : answers) out.push_back(cosine_similarity(g, backend.embed(a)));
    return out;
}

double cosine_max(std::string_view response, const std::vector<std::string>& answers,
                  const EmbeddingBackend& backend) {
    const auto s = answer_similarities(response, answers, backend);
    return *std::max_element(s.begin(), s.end());
}

double mean_similarity(std::string_view response, const std::vector<std::string>& answers,
                       const EmbeddingBackend& backend) {
    const auto s = answer_similarities(response, answers, backend);
    double sum = 0.0;
    for (const double v : s) sum += v;
    return sum / static_cast<double>(s.size());
}

double softmax_similarity(std::string_view response, const std::vector<std::string>& answers,
                          const EmbeddingBackend& backend, double temperature) {
    if (temperature <= 0.0) throw ConfigError("softmax_similarity: temperature must be positive");
    const auto s = answer_similarities(response, answers, backend);
    const double top = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (const double v : s) z += std::exp((v - top) / temperature);
    double out = 0.0;
    for (const double v : s) out += std::exp((v - top) / temperature) / z * v;
    return out;
}

double token_f1_pair(std::string_view response, std::string_view answer) {
    const auto g = normalized_tokens(response);
    const auto a = normalized_tokens(answer);
    if (g.empty() || a.empty()) return g.empty() && a.empty() ? 1.0 : 0.0;

    std::map<std::string, int> counts;
    for (const auto& tok : a) ++counts[tok];
    int overlap = 0;
    for (const auto& tok : g) {
        const auto it = counts.find(tok);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double p = static_cast<double>(overlap) / static_cast<double>(g.size());
    const double r = static_cast<double>(overlap) / static_cast<double>(a.size());
    return 2.0 * p * r / (p + r);
}

double token_f1(std::string_view response, const std::vector<std::string>& answers) {
    if (answers.empty()) throw DataError("token_f1: empty answer list");
    double best = 0.0;
    for (const auto& a : answers) best = std::max(best, token_f1_pair(response, a));
    return best;
}

double hallucination_score(BaselineMethod method, double value) {
    if (method == BaselineMethod::token_f1) return 1.0 - value;
    return 1.0 - (value + 1.0) / 2.0;
}

std::vector<BaselineEvaluation> evaluate_baselines(const std::vector<SampleRecord>& records,
                                                   const EmbeddingBackend& backend, double alpha,
                                                   int bins) {
    if (records.empty()) throw DataError("evaluate_baselines: no records");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ConfigError("evaluate_baselines: alpha must lie in [0,1]");

    std::vector<int> labels;
    labels.reserve(records.size());
    for (const auto& r : records) {
        const double soft = soft_label(r.labels.judge_label, r.labels.hybrid_label, alpha);
        labels.push_back(soft >= 0.5 ? 1 : 0);
    }

    const BaselineMethod methods[] = {BaselineMethod::cosine_max, BaselineMethod::mean_similarity,
                                      BaselineMethod::softmax_similarity,
                                      BaselineMethod::token_f1};
    std::vector<BaselineEvaluation> out;
    for (const BaselineMethod m : methods) {
        BaselineEvaluation ev;
        ev.method = m;
        ev.scores.reserve(records.size());
        for (const auto& r : records) {
            double v = 0.0;
            switch (m) {
                case BaselineMethod::cosine_max:
                    v = cosine_max(r.response, r.gold_answers, backend);
                    break;
                case BaselineMethod::mean_similarity:
                    v = mean_similarity(r.response, r.gold_answers, backend);
                    break;
                case BaselineMethod::softmax_similarity:
                    v = softmax_similarity(r.response, r.gold_answers, backend);
                    break;
                case BaselineMethod::token_f1:
                    v = token_f1(r.response, r.gold_answers);
                    break;
            }
            ev.scores.push_back(hallucination_score(m, v));
        }
        ev.report = compute_report(ev.scores, labels, bins);
        out.push_back(std::move(ev));
    }
    return out;
}

nlohmann::json LayerImportance::to_json() const {
    return {{"stddev", stddev}, {"mean_abs", mean_abs}};
}

LayerImportance layer_importance(const ProbeModel& model,
                                 const std::vector<HiddenStateTensor>& inputs) {
    if (model.spec.family != ProbeFamily::M1)
        throw ConfigError("layer_importance: model must expose per-layer logits (family m1)");
    if (inputs.empty()) throw ConfigError("layer_importance: no inputs");

    const int L = model.spec.shape.layers;
    Mat logits(static_cast<Eigen::Index>(inputs.size()), L);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const ForwardResult fr = probe_forward(model, inputs[i]);
        for (int l = 0; l < L; ++l) logits(static_cast<Eigen::Index>(i), l) = fr.layer_logits[l];
    }

    LayerImportance li;
    li.stddev.resize(L);
    li.mean_abs.resize(L);
    const double n = static_cast<double>(inputs.size());
    for (int l = 0; l < L; ++l) {
        const auto col = logits.col(l);
        const double mean = col.mean();
        li.stddev[l] = std::sqrt((col.array() - mean).square().sum() / n);
        li.mean_abs[l] = col.cwiseAbs().mean();
    }
    return li;
}

double activation_variance(const HiddenStateTensor& h) {
    const int tv = h.valid_tokens();
    if (tv == 0) throw DataError("activation_variance: no valid token positions");
    const std::int64_t count =
        static_cast<std::int64_t>(h.layer_count()) * tv * h.hidden_dim();
    double sum = 0.0, sq = 0.0;
    for (int l = 0; l < h.layer_count(); ++l) {
        const auto m = h.layer(l);
        for (int t = 0; t < tv; ++t)
            for (int d = 0; d < h.hidden_dim(); ++d) {
                const double v = static_cast<double>(m(t, d));
                sum += v;
                sq += v * v;
            }
    }
    const double mean = sum / static_cast<double>(count);
    return std::max(0.0, sq / static_cast<double>(count) - mean * mean);
}

nlohmann::json DisagreementStats::to_json() const {
    return {{"agree_mean", agree_mean},     {"disagree_mean", disagree_mean},
            {"agree_n", agree_n},           {"disagree_n", disagree_n},
            {"auc", auc},                   {"rank_sum_u", rank_sum_u}};
}

DisagreementStats disagreement_variance(const std::vector<SampleRecord>& records) {
    std::vector<double> vars;
    std::vector<int> groups;  // 1 = disagree, the "positive" class of the rank test
    vars.reserve(records.size());
    DisagreementStats st;
    for (const auto& r : records) {
        const double v = activation_variance(r.hidden);
        vars.push_back(v);
        const bool disagree = !r.labels.agreement;
        groups.push_back(disagree ? 1 : 0);
        if (disagree) {
            st.disagree_mean += v;
            ++st.disagree_n;
        } else {
            st.agree_mean += v;
            ++st.agree_n;
        }
    }
    if (st.agree_n == 0 || st.disagree_n == 0)
        throw UndefinedMetricError("disagreement_variance: both groups must be non-empty");
    st.agree_mean /= static_cast<double>(st.agree_n);
    st.disagree_mean /= static_cast<double>(st.disagree_n);
    st.auc = roc_auc(vars, groups);
    st.rank_sum_u = st.auc * static_cast<double>(st.disagree_n) * static_cast<double>(st.agree_n);
    return st;
}

PcaResult pca_project(const std::vector<HiddenStateTensor>& inputs, int components,
                      bool mask_padding) {
    if (inputs.size() < 2) throw DataError("pca_project: need at least two samples");
    const int D = inputs.front().hidden_dim();
    if (components < 1 || components > D)
        throw ConfigError("pca_project: components must lie in [1, hidden_dim]");

    const auto n = static_cast<Eigen::Index>(inputs.size());
    Mat X(n, D);
    for (Eigen::Index i = 0; i < n; ++i)
        X.row(i) = mean_pool_all<double>(inputs[static_cast<std::size_t>(i)], mask_padding)
                       .transpose();

    const Mat centered = X.rowwise() - X.colwise().mean();
    const Mat cov = centered.transpose() * centered / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
    if (solver.info() != Eigen::Success)
        throw DataError("pca_project: eigendecomposition failed");

    // Ascending eigenvalues; read from the back. Tiny negatives are noise.
    const auto& evals = solver.eigenvalues();
    const auto& evecs = solver.eigenvectors();
    double total = 0.0;
    for (Eigen::Index i = 0; i < D; ++i) total += std::max(0.0, evals(i));

    PcaResult out;
    out.components = Mat(D, components);
    out.explained_variance_ratio.resize(static_cast<std::size_t>(components));
    for (int k = 0; k < components; ++k) {
        const Eigen::Index src = D - 1 - k;
        VecX<double> v = evecs.col(src);
        Eigen::Index argmax = 0;
        v.cwiseAbs().maxCoeff(&argmax);
        if (v(argmax) < 0.0) v = -v;
        out.components.col(k) = v;
        out.explained_variance_ratio[static_cast<std::size_t>(k)] =
            total > 0.0 ? std::max(0.0, evals(src)) / total : 0.0;
    }
    out.projections = centered * out.components;
    return out;
}

void write_layer_importance_csv(const std::string& path, const LayerImportance& li) {
    std::ofstream out(path);
    if (!out) throw DataError("write_layer_importance_csv: cannot open " + path);
    out << "layer,stddev,mean_abs\n";
    for (std::size_t l = 0; l < li.stddev.size(); ++l)
        out << l << "," << li.stddev[l] << "," << li.mean_abs[l] << "\n";
}

void write_pca_csv(const std::string& path, const PcaResult& pca,
                   const std::vector<int>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != pca.projections.rows())
        throw DataError("write_pca_csv: labels length must match projection rows");
    std::ofstream out(path);
    if (!out) throw DataError("write_pca_csv: cannot open " + path);
    out << "label";
    for (Eigen::Index k = 0; k < pca.projections.cols(); ++k) out << ",pc" << (k + 1);
    out << "\n";
    for (Eigen::Index i = 0; i < pca.projections.rows(); ++i) {
        out << labels[static_cast<std::size_t>(i)];
        for (Eigen::Index k = 0; k < pca.projections.cols(); ++k)
            out << "," << pca.projections(i, k);
        out << "\n";
    }
}

}  // namespace hsprobe
