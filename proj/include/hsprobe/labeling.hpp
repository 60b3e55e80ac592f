#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hsprobe/embedding.hpp"

namespace hsprobe {

/// Which cascade stage decided the hybrid label.
enum class HybridMethod { substring, similarity, abstention, specific_claim };

std::string to_string(HybridMethod m);
HybridMethod hybrid_method_from_string(std::string_view s);

/// Default similarity threshold separating grounded from hallucinated at
/// the similarity stage.
inline constexpr double kDefaultTau = 0.72;

/// The three paper phrases plus the documented extensions. Callers may load
/// a custom list from a text file instead (one phrase per line, '#' comments).
const std::vector<std::string>& default_abstention_phrases();
std::vector<std::string> load_phrase_list(const std::string& path);

struct HybridResult {
    int label = 0;  // 0 grounded, 1 hallucinated
    HybridMethod method = HybridMethod::substring;
    std::optional<double> similarity;  // present only for the similarity stage
};

/// All labeling signals attached to one sample.
struct LabelBundle {
    std::optional<double> similarity_score;
    int hybrid_label = 0;
    HybridMethod hybrid_method = HybridMethod::substring;
    int judge_label = 0;
    bool judge_supported = false;
    bool judge_abstained = false;
    std::string judge_reason;
    bool agreement = false;
};

/// Stage 1: 1 iff some normalized gold answer is a contiguous substring of
/// the normalized response. Empty answer sets never match.
int substring_match(std::string_view response, const std::vector<std::string>& answers);

/// Stage 2: s_max = max_i cos(phi(response), phi(answer_i)).
/// Embeddings are computed on the raw text; normalization is a stage-1
/// matching device only. Throws DataError on an empty answer list.
double semantic_similarity(std::string_view response, const std::vector<std::string>& answers,
                           const EmbeddingBackend& backend);

/// Stage 3: true iff any phrase occurs (normalized substring) in the response.
bool abstention_check(std::string_view response, const std::vector<std::string>& phrases);

/// Three-stage cascade. With gold answers: substring hit => grounded;
/// otherwise the similarity stage decides with s_max >= tau grounded
/// (boundary inclusive). Without gold answers: abstention => grounded,
/// anything else is a specific claim => hallucinated. Exactly one stage
/// fires; later stages never run once a stage decided.
HybridResult hybrid_label(std::string_view response, const std::vector<std::string>& answers,
                          const EmbeddingBackend& backend, double tau = kDefaultTau,
                          const std::vector<std::string>& phrases = default_abstention_phrases());

/// delta = I(y_hyb == y_judge).
inline bool agreement(int y_hyb, int y_judge) { return y_hyb == y_judge; }

/// Convex interpolation alpha*y_judge + (1-alpha)*y_hyb. alpha in [0,1].
double soft_label(int y_judge, int y_hyb, double alpha);

}  // namespace hsprobe
