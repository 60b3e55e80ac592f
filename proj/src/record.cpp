#include "hsprobe/record.hpp"

#include <nlohmann/json.hpp>

namespace hsprobe {

using nlohmann::json;

namespace {

json bundle_json(const LabelBundle& b) {
    json j;
    if (b.similarity_score) j["similarity_score"] = *b.similarity_score;
    else j["similarity_score"] = nullptr;
    j["hybrid_label"] = b.hybrid_label;
    j["hybrid_method"] = to_string(b.hybrid_method);
    j["judge_label"] = b.judge_label;
    j["judge_supported"] = b.judge_supported;
    j["judge_abstained"] = b.judge_abstained;
    j["judge_reason"] = b.judge_reason;
    j["agreement"] = b.agreement;
    return j;
}

LabelBundle bundle_from(const json& j) {
    LabelBundle b;
    if (!j.at("similarity_score").is_null())
        b.similarity_score = j.at("similarity_score").get<double>();
    b.hybrid_label = j.at("hybrid_label").get<int>();
    b.hybrid_method = hybrid_method_from_string(j.at("hybrid_method").get<std::string>());
    b.judge_label = j.at("judge_label").get<int>();
    b.judge_supported = j.at("judge_supported").get<bool>();
    b.judge_abstained = j.at("judge_abstained").get<bool>();
    b.judge_reason = j.at("judge_reason").get<std::string>();
    b.agreement = j.at("agreement").get<bool>();
    return b;
}

}  // namespace

std::string label_bundle_to_json(const LabelBundle& b) { return bundle_json(b).dump(); }

LabelBundle label_bundle_from_json(const std::string& text) {
    return bundle_from(json::parse(text));
}

std::string record_meta_to_json(const SampleRecord& r) {
    json j;
    j["sample_id"] = r.sample_id;
    j["context"] = r.context;
    j["question"] = r.question;
    j["gold_answers"] = r.gold_answers;
    j["response"] = r.response;
    j["token_count"] = r.token_count;
    j["labels"] = bundle_json(r.labels);
    return j.dump();
}

SampleRecord record_meta_from_json(const std::string& line) {
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw DataError("record metadata line is not valid JSON");
    SampleRecord r;
    try {
        r.sample_id = j.at("sample_id").get<std::string>();
        r.context = j.at("context").get<std::string>();
        r.question = j.at("question").get<std::string>();
        r.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
        r.response = j.at("response").get<std::string>();
        r.token_count = j.at("token_count").get<int>();
        r.labels = bundle_from(j.at("labels"));
    } catch (const json::exception& e) {
        throw DataError(std::string("record metadata field error: ") + e.what());
    }
    return r;
}

}  // namespace hsprobe
