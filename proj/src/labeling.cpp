#include "hsprobe/labeling.hpp"

#include <fstream>

#include "hsprobe/text.hpp"

namespace hsprobe {

std::string to_string(HybridMethod m) {
    switch (m) {
        case HybridMethod::substring: return "substring";
        case HybridMethod::similarity: return "similarity";
        case HybridMethod::abstention: return "abstention";
        case HybridMethod::specific_claim: return "specific_claim";
    }
    return "unknown";
}

HybridMethod hybrid_method_from_string(std::string_view s) {
    if (s == "substring") return HybridMethod::substring;
    if (s == "similarity") return HybridMethod::similarity;
    if (s == "abstention") return HybridMethod::abstention;
    if (s == "specific_claim") return HybridMethod::specific_claim;
    throw DataError("unknown hybrid method: " + std::string(s));
}

const std::vector<std::string>& default_abstention_phrases() {
    static const std::vector<std::string> phrases = {
        "not enough information",
        "cannot determine",
        "not stated",
        "cannot be determined",
        "does not say",
        "no answer",
    };
    return phrases;
}

std::vector<std::string> load_phrase_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open phrase list: " + path);
    std::vector<std::string> phrases;
    std::string line;
    while (std::getline(in, line)) {
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        phrases.push_back(line.substr(start));
    }
    if (phrases.empty()) throw DataError("phrase list is empty: " + path);
    return phrases;
}

int substring_match(std::string_view response, const std::vector<std::string>& answers) {
    for (const auto& a : answers)
        if (normalized_contains(response, a)) return 1;
    return 0;
}

double semantic_similarity(std::string_view response, const std::vector<std::string>& answers,
                           const EmbeddingBackend& backend) {
    if (answers.empty()) throw DataError("semantic_similarity: empty answer list");
    const VecX<float> g = backend.embed(response);
    double best = -1.0;
    for (const auto& a : answers)
        best = std::max(best, cosine_similarity(g, backend.embed(a)));
    return best;
}

bool abstention_check(std::string_view response, const std::vector<std::string>& phrases) {
    for (const auto& p : phrases)
        if (normalized_contains(response, p)) return true;
    return false;
}

HybridResult hybrid_label(std::string_view response, const std::vector<std::string>& answers,
                          const EmbeddingBackend& backend, double tau,
                          const std::vector<std::string>& phrases) {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("hybrid_label: tau must lie in (0,1)");
    if (!answers.empty()) {
        if (substring_match(response, answers) == 1)
            return {0, HybridMethod::substring, std::nullopt};
        const double s_max = semantic_similarity(response, answers, backend);
        return {s_max >= tau ? 0 : 1, HybridMethod::similarity, s_max};
    }
    if (abstention_check(response, phrases))
        return {0, HybridMethod::abstention, std::nullopt};
    return {1, HybridMethod::specific_claim, std::nullopt};
}

double soft_label(int y_judge, int y_hyb, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("soft_label: alpha must lie in [0,1]");
    return alpha * y_judge + (1.0 - alpha) * y_hyb;
}

}  // namespace hsprobe
