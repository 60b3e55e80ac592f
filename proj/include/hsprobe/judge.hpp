#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <condition_variable>
#include <unordered_map>
#include <unordered_set>

#include "hsprobe/errors.hpp"

namespace hsprobe {

/// Structured judge output. verdict 0 means grounded, 1 means hallucinated.
struct JudgeVerdict {
    bool supported = false;
    bool abstained = false;
    int verdict = 0;
    std::string reason;

    bool operator==(const JudgeVerdict&) const = default;
};

/// Renders the fixed judge prompt for a (context, question, answer) triple.
std::string render_judge_prompt(std::string_view context, std::string_view question,
                                std::string_view answer);

/// Hash of the prompt template text; recorded next to every cached verdict
/// so stale caches are detectable after a template change.
std::uint64_t judge_prompt_hash();

/// Extracts the first JSON object from a possibly chatty response and
/// coerces the four verdict fields. Throws MalformedVerdict on failure.
JudgeVerdict parse_judge_response(const std::string& body);

/// One judged sample. `raw()` issues the request; implementations may be a
/// live endpoint, an offline replay store, or a heuristic mock.
class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    /// Returns the raw response text for a rendered prompt.
    virtual std::string request(std::string_view sample_id, const std::string& prompt) = 0;
    /// Number of re-prompts after a malformed response.
    virtual int retries() const { return 2; }
};

/// Live judge over HTTP: POSTs {"sample_id", "prompt"} to the endpoint.
class HttpJudgeClient final : public JudgeClient {
public:
    explicit HttpJudgeClient(std::string endpoint, int retries = 2);
    ~HttpJudgeClient() override;
    std::string request(std::string_view sample_id, const std::string& prompt) override;
    int retries() const override { return retries_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int retries_;
};

/// Offline replay: a line-delimited JSON file keyed by sample_id. A miss is
/// a hard error; replay never fabricates verdicts.
class ReplayJudgeClient final : public JudgeClient {
public:
    explicit ReplayJudgeClient(const std::string& path);
    std::string request(std::string_view sample_id, const std::string& prompt) override;
    bool contains(std::string_view sample_id) const;

private:
    std::map<std::string, std::string, std::less<>> responses_;
};

/// Deterministic bundled judge for desk-scale runs without a model. Applies
/// a simple containment/abstention rule over the rendered prompt.
class MockJudgeClient final : public JudgeClient {
public:
    std::string request(std::string_view sample_id, const std::string& prompt) override;
};

/// Persistent verdict cache: append-only JSONL of
/// {sample_id, supported, abstained, verdict, reason, prompt_hash}.
/// Safe for concurrent lookup/insert. An empty path keeps it in memory only.
class VerdictCache {
public:
    VerdictCache() = default;
    explicit VerdictCache(std::string path);

    std::optional<JudgeVerdict> lookup(std::string_view sample_id) const;
    void insert(const std::string& sample_id, const JudgeVerdict& v);
    std::size_t size() const;

private:
    std::string path_;
    mutable std::mutex mu_;
    std::map<std::string, JudgeVerdict, std::less<>> mem_;
};

/// Cached judge call: at most one outbound request per sample_id over the
/// run's lifetime. Malformed responses are retried client.retries() times
/// before MalformedVerdict is raised. Concurrent callers on the same
/// sample_id are single-flighted.
class JudgeLabeler {
public:
    JudgeLabeler(JudgeClient& client, VerdictCache& cache) : client_(client), cache_(cache) {}

    JudgeVerdict label(std::string_view context, std::string_view question,
                       std::string_view answer, const std::string& sample_id);

    /// Outbound requests issued so far (excludes cache hits).
    std::uint64_t outbound_requests() const { return outbound_; }

private:
    JudgeClient& client_;
    VerdictCache& cache_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::unordered_set<std::string> in_flight_;
    std::uint64_t outbound_ = 0;
};

}  // namespace hsprobe
