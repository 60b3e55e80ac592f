#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hsprobe/embedding.hpp"
#include "hsprobe/metrics.hpp"
#include "hsprobe/probes.hpp"
#include "hsprobe/record.hpp"

#include <nlohmann/json.hpp>

namespace hsprobe {

enum class BaselineMethod { cosine_max, mean_similarity, softmax_similarity, token_f1 };

std::string to_string(BaselineMethod m);
BaselineMethod baseline_method_from_string(const std::string& s);

/// Per-answer cosine similarities cos(phi(response), phi(answer_i)).
/// Throws DataError on an empty answer list.
std::vector<double> answer_similarities(std::string_view response,
                                        const std::vector<std::string>& answers,
                                        const EmbeddingBackend& backend);

double cosine_max(std::string_view response, const std::vector<std::string>& answers,
                  const EmbeddingBackend& backend);
double mean_similarity(std::string_view response, const std::vector<std::string>& answers,
                       const EmbeddingBackend& backend);
/// Softmax-weighted average of the per-answer similarities:
/// sum_i softmax(s / temperature)_i * s_i. Lies between min and max.
double softmax_similarity(std::string_view response, const std::vector<std::string>& answers,
                          const EmbeddingBackend& backend, double temperature = 1.0);

/// Lexical F1 on normalized token multisets, max over answers. Follows the
/// empty-string convention: both sides empty -> 1, exactly one empty -> 0.
double token_f1(std::string_view response, const std::vector<std::string>& answers);
double token_f1_pair(std::string_view response, std::string_view answer);

/// Higher similarity means grounded, so the hallucination score flips and
/// normalizes: cosine variants map s in [-1,1] to 1-(s+1)/2; token F1 maps
/// to 1-F1. Both land in [0,1] with 1 = most hallucination-like.
double hallucination_score(BaselineMethod method, double value);

struct BaselineEvaluation {
    BaselineMethod method = BaselineMethod::cosine_max;
    std::vector<double> scores;  // oriented hallucination scores, record order
    MetricsReport report;
};

/// Runs all four baselines over the records and evaluates each against hard
/// labels from the alpha-blend (alpha*judge + (1-alpha)*hybrid >= 0.5), the
/// same target rule the trainer uses. Records must be answerable: an empty
/// gold-answer list throws DataError.
std::vector<BaselineEvaluation> evaluate_baselines(const std::vector<SampleRecord>& records,
                                                   const EmbeddingBackend& backend,
                                                   double alpha = 1.0, int bins = 10);

struct LayerImportance {
    std::vector<double> stddev;    // population std of the layer logit across the split
    std::vector<double> mean_abs;  // mean |logit| per layer

    nlohmann::json to_json() const;
};

/// Per-layer signal strength of a layer-wise probe: spread and magnitude of
/// each layer's contribution logit over the inputs. The model must expose
/// per-layer logits (family m1); anything else throws ConfigError.
LayerImportance layer_importance(const ProbeModel& model,
                                 const std::vector<HiddenStateTensor>& inputs);

/// Population variance of every unpadded activation value in the tensor.
double activation_variance(const HiddenStateTensor& h);

struct DisagreementStats {
    double agree_mean = 0.0;     // mean per-sample activation variance where labelers agree
    double disagree_mean = 0.0;  // same where they disagree
    std::size_t agree_n = 0;
    std::size_t disagree_n = 0;
    double auc = 0.0;         // P(var_disagree > var_agree) + ties/2, rank-based
    double rank_sum_u = 0.0;  // Mann-Whitney U for the disagree group: auc * n1 * n0

    nlohmann::json to_json() const;
};

/// Splits records by the label-agreement flag and compares the activation-
/// variance distributions with a rank-sum test. Throws UndefinedMetricError
/// when either group is empty.
DisagreementStats disagreement_variance(const std::vector<SampleRecord>& records);

struct PcaResult {
    MatX<double> projections;                      // n x k, rows in input order
    std::vector<double> explained_variance_ratio;  // non-increasing, sums to <= 1
    MatX<double> components;                       // D x k, sign-fixed eigenvectors
};

/// Exact PCA of the mean-pooled tensors via covariance eigendecomposition.
/// Sign convention: each component's largest-magnitude coordinate is
/// positive. Throws DataError with fewer than two samples, ConfigError when
/// components falls outside [1, D].
PcaResult pca_project(const std::vector<HiddenStateTensor>& inputs, int components,
                      bool mask_padding = true);

/// CSV emitters for the plotting pipeline.
void write_layer_importance_csv(const std::string& path, const LayerImportance& li);
void write_pca_csv(const std::string& path, const PcaResult& pca,
                   const std::vector<int>& labels);

}  // namespace hsprobe
