#include "hsprobe/judge.hpp"

#include <fstream>

#include "hsprobe/labeling.hpp"
#include "hsprobe/rng.hpp"
#include "hsprobe/text.hpp"

// httplib drags in <resolv.h>, whose _res macro mangles Eigen's parameter
// names. Keep it after every Eigen-reaching include.
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace hsprobe {

using nlohmann::json;

namespace {

// Template version 1. Any edit here changes judge_prompt_hash(), which is
// recorded in caches and run metadata.
constexpr std::string_view kJudgePromptTemplate =
    R"(You are a strict grounding judge. Given a context passage, a question and a model-generated answer, decide whether the answer is fully supported by the context.
Respond with ONLY a JSON object with exactly these fields:
{"supported": <true|false>, "abstained": <true|false>, "verdict": <0|1>, "reason": "<short explanation>"}
verdict must be 0 if the answer is grounded in the context or correctly declines to answer, and 1 if the answer is hallucinated.

Context:
{context}

Question:
{question}

Answer:
{answer}
)";

void replace_all(std::string& s, std::string_view key, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = s.find(key, pos)) != std::string::npos) {
        s.replace(pos, key.size(), value);
        pos += value.size();
    }
}

bool coerce_bool(const json& v) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer()) return v.get<int>() != 0;
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "true" || s == "True" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "False" || s == "0" || s == "no") return false;
    }
    throw DataError("judge field is not a boolean");
}

int coerce_verdict(const json& v) {
    int out;
    if (v.is_number_integer()) out = v.get<int>();
    else if (v.is_boolean()) out = v.get<bool>() ? 1 : 0;
    else if (v.is_string()) out = v.get<std::string>() == "1" ? 1 : (v.get<std::string>() == "0" ? 0 : -1);
    else out = -1;
    if (out != 0 && out != 1) throw DataError("judge verdict must be 0 or 1");
    return out;
}

}  // namespace

std::string render_judge_prompt(std::string_view context, std::string_view question,
                                std::string_view answer) {
    std::string p(kJudgePromptTemplate);
    replace_all(p, "{context}", context);
    replace_all(p, "{question}", question);
    replace_all(p, "{answer}", answer);
    return p;
}

std::uint64_t judge_prompt_hash() { return fnv1a64(kJudgePromptTemplate); }

JudgeVerdict parse_judge_response(const std::string& body) {
    // Scan for the first brace-balanced JSON object that parses.
    for (std::size_t start = body.find('{'); start != std::string::npos;
         start = body.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (std::size_t i = start; i < body.size(); ++i) {
            const char c = body[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                if (--depth == 0) {
                    auto j = json::parse(body.substr(start, i - start + 1), nullptr, false);
                    if (j.is_discarded() || !j.is_object()) break;
                    try {
                        if (!j.contains("supported") || !j.contains("abstained") ||
                            !j.contains("verdict") || !j.contains("reason"))
                            break;
                        JudgeVerdict v;
                        v.supported = coerce_bool(j["supported"]);
                        v.abstained = coerce_bool(j["abstained"]);
                        v.verdict = coerce_verdict(j["verdict"]);
                        v.reason = j["reason"].is_string() ? j["reason"].get<std::string>()
                                                           : j["reason"].dump();
                        return v;
                    } catch (const DataError&) {
                        break;  // malformed fields; try the next candidate object
                    }
                }
            }
        }
    }
    throw MalformedVerdict("judge response carries no parseable verdict object", body);
}

// ---------------------------------------------------------------------------
// HttpJudgeClient

struct HttpJudgeClient::Impl {
    std::string host;
    std::string path;
    std::unique_ptr<httplib::Client> client;
};

HttpJudgeClient::HttpJudgeClient(std::string endpoint, int retries)
    : impl_(std::make_unique<Impl>()), retries_(retries) {
    auto scheme_end = endpoint.find("//");
    auto slash = endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 2);
    if (slash == std::string::npos) {
        impl_->host = endpoint;
        impl_->path = "/judge";
    } else {
        impl_->host = endpoint.substr(0, slash);
        impl_->path = endpoint.substr(slash);
    }
    impl_->client = std::make_unique<httplib::Client>(impl_->host);
    impl_->client->set_connection_timeout(30);
    impl_->client->set_read_timeout(120);
}

HttpJudgeClient::~HttpJudgeClient() = default;

std::string HttpJudgeClient::request(std::string_view sample_id, const std::string& prompt) {
    json body;
    body["sample_id"] = std::string(sample_id);
    body["prompt"] = prompt;
    auto res = impl_->client->Post(impl_->path, body.dump(), "application/json");
    if (!res) throw TransportError("judge endpoint unreachable: " + impl_->host);
    if (res->status != 200)
        throw TransportError("judge endpoint returned status " + std::to_string(res->status));
    return res->body;
}

// ---------------------------------------------------------------------------
// ReplayJudgeClient

ReplayJudgeClient::ReplayJudgeClient(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open judge replay store: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("sample_id"))
            throw DataError("replay store line " + std::to_string(lineno) + " is malformed");
        responses_[j["sample_id"].get<std::string>()] = line;
    }
}

std::string ReplayJudgeClient::request(std::string_view sample_id, const std::string&) {
    auto it = responses_.find(sample_id);
    if (it == responses_.end())
        throw JudgeError("offline replay store has no verdict for sample_id '" +
                         std::string(sample_id) + "'");
    return it->second;
}

bool ReplayJudgeClient::contains(std::string_view sample_id) const {
    return responses_.find(sample_id) != responses_.end();
}

// ---------------------------------------------------------------------------
// MockJudgeClient

std::string MockJudgeClient::request(std::string_view, const std::string& prompt) {
    // Recover the answer and context blocks from the rendered prompt.
    auto section = [&](std::string_view header) -> std::string {
        auto pos = prompt.rfind(std::string(header) + ":\n");
        if (pos == std::string::npos) return {};
        pos += header.size() + 2;
        auto end = prompt.find("\n\n", pos);
        return prompt.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    };
    const std::string context = section("Context");
    const std::string answer = section("Answer");

    const bool abstained = abstention_check(answer, default_abstention_phrases());
    bool supported = false;
    if (!abstained) {
        // Supported iff a meaningful chunk of the answer occurs in the context.
        const auto toks = normalized_tokens(answer);
        std::size_t hits = 0;
        for (const auto& t : toks)
            if (t.size() > 2 && normalized_contains(context, t)) ++hits;
        supported = !toks.empty() && hits * 2 >= toks.size();
    }
    const int verdict = (supported || abstained) ? 0 : 1;

    json j;
    j["supported"] = supported;
    j["abstained"] = abstained;
    j["verdict"] = verdict;
    j["reason"] = abstained ? "answer abstains"
                            : (supported ? "answer terms found in context"
                                         : "answer not entailed by context");
    return j.dump();
}

// ---------------------------------------------------------------------------
// VerdictCache

VerdictCache::VerdictCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;  // fresh cache file; created on first insert
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw DataError("verdict cache line " + std::to_string(lineno) + " is malformed");
        JudgeVerdict v;
        v.supported = j.at("supported").get<bool>();
        v.abstained = j.at("abstained").get<bool>();
        v.verdict = j.at("verdict").get<int>();
        v.reason = j.at("reason").get<std::string>();
        mem_[j.at("sample_id").get<std::string>()] = v;
    }
}

std::optional<JudgeVerdict> VerdictCache::lookup(std::string_view sample_id) const {
    std::lock_guard lock(mu_);
    auto it = mem_.find(sample_id);
    if (it == mem_.end()) return std::nullopt;
    return it->second;
}

void VerdictCache::insert(const std::string& sample_id, const JudgeVerdict& v) {
    std::lock_guard lock(mu_);
    if (mem_.count(sample_id)) return;
    mem_[sample_id] = v;
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("cannot append to verdict cache: " + path_);
    json j;
    j["sample_id"] = sample_id;
    j["supported"] = v.supported;
    j["abstained"] = v.abstained;
    j["verdict"] = v.verdict;
    j["reason"] = v.reason;
    j["prompt_hash"] = judge_prompt_hash();
    out << j.dump() << "\n";
}

std::size_t VerdictCache::size() const {
    std::lock_guard lock(mu_);
    return mem_.size();
}

// ---------------------------------------------------------------------------
// JudgeLabeler

JudgeVerdict JudgeLabeler::label(std::string_view context, std::string_view question,
                                 std::string_view answer, const std::string& sample_id) {
    {
        std::unique_lock lock(mu_);
        // Single-flight: wait out a concurrent request for the same id.
        cv_.wait(lock, [&] { return !in_flight_.count(sample_id); });
        if (auto hit = cache_.lookup(sample_id)) return *hit;
        in_flight_.insert(sample_id);
    }

    struct Release {
        JudgeLabeler* self;
        const std::string& id;
        ~Release() {
            std::lock_guard lock(self->mu_);
            self->in_flight_.erase(id);
            self->cv_.notify_all();
        }
    } release{this, sample_id};

    std::string prompt = render_judge_prompt(context, question, answer);
    std::string raw;
    const int attempts = 1 + std::max(0, client_.retries());
    for (int attempt = 0; attempt < attempts; ++attempt) {
        {
            std::lock_guard lock(mu_);
            ++outbound_;
        }
        raw = client_.request(sample_id, prompt);
        try {
            JudgeVerdict v = parse_judge_response(raw);
            cache_.insert(sample_id, v);
            return v;
        } catch (const MalformedVerdict&) {
            if (attempt + 1 == attempts) throw;
            prompt = render_judge_prompt(context, question, answer);
            prompt += "\nYour previous reply was not valid JSON. Reply with ONLY the JSON object.\n";
        }
    }
    throw MalformedVerdict("judge retries exhausted", raw);
}

}  // namespace hsprobe
