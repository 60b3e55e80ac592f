#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "hsprobe/embedding.hpp"
#include "hsprobe/judge.hpp"
#include "hsprobe/rng.hpp"

// httplib drags in <resolv.h>, whose _res macro mangles Eigen's parameter
// names. Keep it after every Eigen-reaching include.
#include <httplib.h>
#include <nlohmann/json.hpp>

using namespace hsprobe;
using nlohmann::json;

TEST_CASE("prompt rendering substitutes all three blocks") {
    const auto p = render_judge_prompt("CTX text", "Q text", "A text");
    CHECK(p.find("Context:\nCTX text") != std::string::npos);
    CHECK(p.find("Question:\nQ text") != std::string::npos);
    CHECK(p.find("Answer:\nA text") != std::string::npos);
    CHECK(p.find("{context}") == std::string::npos);
    CHECK(p.find("{question}") == std::string::npos);
    CHECK(p.find("{answer}") == std::string::npos);
    CHECK(judge_prompt_hash() != 0);
    CHECK(judge_prompt_hash() == judge_prompt_hash());
}

TEST_CASE("verdict parsing accepts clean and chatty replies") {
    const auto clean = parse_judge_response(
        R"({"supported": true, "abstained": false, "verdict": 0, "reason": "cited"})");
    CHECK(clean.supported);
    CHECK_FALSE(clean.abstained);
    CHECK(clean.verdict == 0);
    CHECK(clean.reason == "cited");

    const auto chatty = parse_judge_response(
        "Sure, here is my analysis:\n"
        R"({"supported": false, "abstained": false, "verdict": 1, "reason": "fabricated {year}"})"
        "\nHope that helps!");
    CHECK(chatty.verdict == 1);
    CHECK(chatty.reason == "fabricated {year}");

    // Coercions seen in the wild: stringly bools, boolean verdicts.
    const auto coerced = parse_judge_response(
        R"({"supported": "true", "abstained": 0, "verdict": "1", "reason": "x"})");
    CHECK(coerced.supported);
    CHECK_FALSE(coerced.abstained);
    CHECK(coerced.verdict == 1);

    // The first object lacks fields; scanning continues to the valid one.
    const auto second = parse_judge_response(
        R"(The schema is {"supported": "?"} as requested. )"
        R"({"supported": true, "abstained": false, "verdict": 0, "reason": "ok"})");
    CHECK(second.verdict == 0);
}

TEST_CASE("verdict parsing rejects malformed replies with the raw text") {
    const std::string bad = "I think the answer is probably fine.";
    try {
        parse_judge_response(bad);
        FAIL("expected MalformedVerdict");
    } catch (const MalformedVerdict& e) {
        CHECK(e.raw_text == bad);
    }

    CHECK_THROWS_AS(parse_judge_response(R"({"supported": true, "verdict": 0})"),
                    MalformedVerdict);
    CHECK_THROWS_AS(parse_judge_response(
                        R"({"supported": true, "abstained": false, "verdict": 2, "reason": "x"})"),
                    MalformedVerdict);
    CHECK_THROWS_AS(parse_judge_response(""), MalformedVerdict);
}

TEST_CASE("mock judge applies containment and abstention rules") {
    MockJudgeClient mock;
    const std::string ctx = "The Eiffel Tower was completed in 1889 in Paris.";

    auto v1 = parse_judge_response(
        mock.request("s1", render_judge_prompt(ctx, "When?", "It was completed in 1889.")));
    CHECK(v1.verdict == 0);
    CHECK(v1.supported);

    auto v2 = parse_judge_response(
        mock.request("s2", render_judge_prompt(ctx, "Who built it?", "Not enough information.")));
    CHECK(v2.abstained);
    CHECK(v2.verdict == 0);

    auto v3 = parse_judge_response(
        mock.request("s3", render_judge_prompt(ctx, "When?", "Around 1931 in London probably.")));
    CHECK(v3.verdict == 1);
    CHECK_FALSE(v3.supported);
}

TEST_CASE("verdict cache persists and deduplicates") {
    const std::string path = "verdict_cache_tmp.jsonl";
    std::remove(path.c_str());
    JudgeVerdict v{true, false, 0, "ok"};
    {
        VerdictCache cache(path);
        CHECK(cache.size() == 0);
        cache.insert("a", v);
        cache.insert("b", JudgeVerdict{false, false, 1, "nope"});
        cache.insert("a", JudgeVerdict{false, true, 1, "ignored duplicate"});
        CHECK(cache.size() == 2);
        CHECK(cache.lookup("a").value() == v);
        CHECK_FALSE(cache.lookup("missing").has_value());
    }
    {
        VerdictCache reopened(path);
        CHECK(reopened.size() == 2);
        CHECK(reopened.lookup("a").value() == v);
        reopened.insert("a", JudgeVerdict{false, true, 1, "still ignored"});
    }
    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    std::uint64_t recorded_hash = 0;
    while (std::getline(in, line)) {
        ++lines;
        recorded_hash = json::parse(line).at("prompt_hash").get<std::uint64_t>();
    }
    CHECK(lines == 2);
    CHECK(recorded_hash == judge_prompt_hash());
    std::remove(path.c_str());
}

TEST_CASE("replay store returns recorded verdicts and refuses to invent") {
    const std::string path = "replay_tmp.jsonl";
    {
        std::ofstream out(path);
        out << R"({"sample_id": "q1", "supported": true, "abstained": false, "verdict": 0, "reason": "recorded"})"
            << "\n";
    }
    ReplayJudgeClient replay(path);
    CHECK(replay.contains("q1"));
    CHECK_FALSE(replay.contains("q2"));
    auto v = parse_judge_response(replay.request("q1", "ignored prompt"));
    CHECK(v.verdict == 0);
    CHECK(v.reason == "recorded");
    CHECK_THROWS_AS(replay.request("q2", "prompt"), JudgeError);
    std::remove(path.c_str());

    CHECK_THROWS_AS(ReplayJudgeClient("no_such_replay_file.jsonl"), DataError);
}

namespace {

/// Wraps another client, counting outbound calls and recording prompts.
class CountingClient final : public JudgeClient {
public:
    explicit CountingClient(JudgeClient& inner) : inner_(inner) {}
    std::string request(std::string_view id, const std::string& prompt) override {
        ++calls;
        last_prompt = prompt;
        return inner_.request(id, prompt);
    }
    int retries() const override { return inner_.retries(); }

    std::atomic<int> calls{0};
    std::string last_prompt;

private:
    JudgeClient& inner_;
};

/// Emits garbage for the first `bad` requests, then a fixed valid verdict.
class FlakyClient final : public JudgeClient {
public:
    explicit FlakyClient(int bad, int retries = 2) : bad_(bad), retries_(retries) {}
    std::string request(std::string_view, const std::string& prompt) override {
        ++calls;
        last_prompt = prompt;
        if (calls <= bad_) return "sorry, no JSON today";
        return R"({"supported": true, "abstained": false, "verdict": 0, "reason": "late"})";
    }
    int retries() const override { return retries_; }

    int calls = 0;
    std::string last_prompt;

private:
    int bad_;
    int retries_;
};

}  // namespace

TEST_CASE("labeler issues one outbound request per sample across runs") {
    MockJudgeClient mock;
    CountingClient counting(mock);
    VerdictCache cache;  // in-memory
    JudgeLabeler labeler(counting, cache);

    auto v1 = labeler.label("ctx with paris", "q", "paris", "id-1");
    auto v2 = labeler.label("ctx with paris", "q", "paris", "id-1");
    CHECK(v1 == v2);
    CHECK(counting.calls == 1);
    CHECK(labeler.outbound_requests() == 1);

    // A fresh labeler over the same cache still never re-asks.
    JudgeLabeler again(counting, cache);
    auto v3 = again.label("ctx with paris", "q", "paris", "id-1");
    CHECK(v3 == v1);
    CHECK(counting.calls == 1);
    CHECK(again.outbound_requests() == 0);
}

TEST_CASE("labeler retries malformed replies with a stricter prompt") {
    FlakyClient flaky(1);
    VerdictCache cache;
    JudgeLabeler labeler(flaky, cache);
    auto v = labeler.label("c", "q", "a", "id-2");
    CHECK(v.verdict == 0);
    CHECK(flaky.calls == 2);
    CHECK(labeler.outbound_requests() == 2);
    CHECK(flaky.last_prompt.find("ONLY the JSON object") != std::string::npos);
}

TEST_CASE("labeler exhausts retries then surfaces the malformed reply") {
    FlakyClient hopeless(100, 2);
    VerdictCache cache;
    JudgeLabeler labeler(hopeless, cache);
    CHECK_THROWS_AS(labeler.label("c", "q", "a", "id-3"), MalformedVerdict);
    CHECK(hopeless.calls == 3);  // initial attempt + 2 retries
    CHECK(cache.size() == 0);
}

TEST_CASE("concurrent labeling of one sample is single-flighted") {
    class SlowClient final : public JudgeClient {
    public:
        std::string request(std::string_view, const std::string&) override {
            ++calls;
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            return R"({"supported": true, "abstained": false, "verdict": 0, "reason": "slow"})";
        }
        std::atomic<int> calls{0};
    } slow;

    VerdictCache cache;
    JudgeLabeler labeler(slow, cache);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&] { labeler.label("c", "q", "a", "shared-id"); });
    for (auto& t : threads) t.join();
    CHECK(slow.calls == 1);
    CHECK(labeler.outbound_requests() == 1);
    CHECK(cache.size() == 1);
}

TEST_CASE("http judge client round trips against a local server") {
    httplib::Server server;
    server.Post("/judge", [](const httplib::Request& req, httplib::Response& res) {
        auto j = json::parse(req.body);
        json out;
        out["supported"] = true;
        out["abstained"] = false;
        out["verdict"] = 0;
        out["reason"] = "echo for " + j.at("sample_id").get<std::string>();
        res.set_content(out.dump(), "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    {
        HttpJudgeClient client("http://127.0.0.1:" + std::to_string(port) + "/judge");
        auto v = parse_judge_response(client.request("s9", render_judge_prompt("c", "q", "a")));
        CHECK(v.verdict == 0);
        CHECK(v.reason == "echo for s9");

        HttpJudgeClient broken("http://127.0.0.1:" + std::to_string(port) + "/broken");
        CHECK_THROWS_AS(broken.request("s9", "p"), TransportError);

        HttpJudgeClient unreachable("http://127.0.0.1:1/judge");
        CHECK_THROWS_AS(unreachable.request("s9", "p"), TransportError);
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("http embedding backend round trips against a local server") {
    httplib::Server server;
    server.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
        auto j = json::parse(req.body);
        const auto text = j.at("text").get<std::string>();
        json out;
        out["embedding"] = {static_cast<double>(text.size()), 1.0, 0.0};
        res.set_content(out.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    {
        HttpEmbeddingBackend be("http://127.0.0.1:" + std::to_string(port) + "/embed", 3);
        auto v = be.embed("abcd");
        REQUIRE(v.size() == 3);
        CHECK(v[0] == 4.0f);
        CHECK(v[1] == 1.0f);
        CHECK(be.dimension() == 3);
    }

    server.stop();
    server_thread.join();
}
