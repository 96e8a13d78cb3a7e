#include <gtest/gtest.h>

#include <httplib.h>

#include <random>
#include <thread>

#include "avua/error.hpp"
#include "avua/llm_gateway.hpp"
#include "support.hpp"

using namespace avua;
using namespace avua::testing;

namespace {

PromptBundle bundle(std::string user, std::string system = "") {
    PromptBundle b;
    b.system_text = std::move(system);
    b.user_text = std::move(user);
    return b;
}

}  // namespace

TEST(ScriptedBackend, ReturnsMatchedResponseVerbatim) {
    ScriptedBackend backend({entry("trial marker 7", "Evaluation: True, Confidence: 90")});
    EXPECT_EQ(backend.complete(bundle("Evaluation trial marker 7")), "Evaluation: True, Confidence: 90");
}

TEST(ScriptedBackend, MaxUsesExhaustion) {
    ScriptedBackend backend({entry("trial marker 7", "ok", 1)});
    backend.complete(bundle("Evaluation trial marker 7"));
    EXPECT_THROW(backend.complete(bundle("Evaluation trial marker 7")), NoScriptMatch);
    EXPECT_EQ(backend.uses(0), 1);
}

TEST(ScriptedBackend, EmptyScriptNeverMatches) {
    ScriptedBackend backend({});
    EXPECT_THROW(backend.complete(bundle("anything")), NoScriptMatch);
    TempDir dir;
    write_file(dir / "empty.json", "[]");
    ScriptedBackend loaded(load_script(dir / "empty.json"));
    EXPECT_THROW(loaded.complete(bundle("anything")), NoScriptMatch);
}

TEST(ScriptedBackend, FirstMatchInFileOrderWins) {
    ScriptedBackend backend({entry("alpha", "first", 1), entry("alpha", "second"), entry("a", "third")});
    EXPECT_EQ(backend.complete(bundle("alpha")), "first");
    EXPECT_EQ(backend.complete(bundle("alpha")), "second");
    EXPECT_EQ(backend.complete(bundle("alpha")), "second");
    EXPECT_EQ(backend.complete(bundle("a")), "third");
}

TEST(ScriptedBackend, RegexMatchersSeeSystemAndUser) {
    ScriptedBackend backend({entry("^You are .*\\nQuestion: (red|blue)", "colour", {}, MatcherKind::regex)});
    EXPECT_EQ(backend.complete(bundle("Question: blue", "You are a judge")), "colour");
    EXPECT_THROW(backend.complete(bundle("Question: green", "You are a judge")), NoScriptMatch);
}

TEST(ScriptedBackend, LenientModeFallsBack) {
    ScriptedBackend backend({}, false);
    EXPECT_EQ(backend.complete(bundle("x")), "Final Answer: unknown");
}

TEST(ScriptedBackend, ParsesScriptFiles) {
    const Json doc = Json::parse(R"([
        {"matcher": "a+b", "matcher_kind": "regex", "response": "r1", "max_uses": 2},
        {"matcher": "plain", "response": "r2"}
    ])");
    const auto entries = parse_script(doc);
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].kind, MatcherKind::regex);
    EXPECT_EQ(entries[0].max_uses, 2);
    EXPECT_EQ(entries[1].kind, MatcherKind::substring);
    EXPECT_FALSE(entries[1].max_uses);
    EXPECT_THROW(parse_script(Json::parse(R"([{"matcher": "x", "matcher_kind": "glob", "response": ""}])")),
                 ConfigError);
    EXPECT_THROW(parse_script(Json::parse(R"([{"matcher": "x", "response": "", "max_uses": 0}])")), ConfigError);
    EXPECT_THROW(load_script("/nonexistent/script.json"), ConfigError);
}

TEST(ScriptedBackend, UseCountsAreThreadSafe) {
    ScriptedBackend backend({entry("x", "one", 500), entry("x", "rest")});
    std::atomic<int> ones{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 100; ++i) ones += backend.complete(bundle("x")) == "one";
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(ones.load(), 500);
    EXPECT_EQ(backend.uses(0), 500);
    EXPECT_EQ(backend.uses(1), 300);
}

TEST(PromptDigest, CoversSystemUserAndDecoding) {
    PromptBundle a = bundle("user", "system");
    PromptBundle b = a;
    EXPECT_EQ(prompt_digest(a), prompt_digest(b));
    EXPECT_EQ(prompt_digest(a).size(), 64u);
    b.decoding.temperature = 0.5;
    EXPECT_NE(prompt_digest(a), prompt_digest(b));
    b = a;
    b.decoding.stop_sequences = {"\nObservation:"};
    EXPECT_NE(prompt_digest(a), prompt_digest(b));
    b = a;
    b.system_text = "systemuser";
    b.user_text = "";
    EXPECT_NE(prompt_digest(a), prompt_digest(b));
}

TEST(HashingEmbedder, DeterministicAndSelfSimilar) {
    HashingEmbedder e;
    const auto a = e.embed("where did I put the key");
    const auto b = e.embed("where did I put the key");
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.dimension(), 256u);
    for (const char* s : {"where did I put the key", "x", "!!!", "Überraschung im Video"}) {
        EXPECT_EQ(cosine(e.embed(s), e.embed(s)), 1.0) << s;
    }
}

TEST(HashingEmbedder, PinnedCosinesFromReferenceImplementation) {
    // Frozen from tests/oracles/hashing_embedder.py.
    HashingEmbedder e;
    const auto base = e.embed("object location query");
    const double near = cosine(base, e.embed("object location query please"));
    const double far = cosine(base, e.embed("plot summary of the film"));
    EXPECT_NEAR(near, 0.86602540378443871, 1e-12);
    EXPECT_NEAR(far, 0.2581988897471611, 1e-12);
    EXPECT_GT(near, far);
    EXPECT_EQ(e.bucket("object"), 153u);
    EXPECT_EQ(e.bucket("location"), 161u);
    EXPECT_EQ(e.bucket("the"), 161u);
    EXPECT_EQ(e.bucket("film"), 76u);
}

TEST(HashingEmbedder, BagOfTokensIsOrderInvariantAndCaseFolded) {
    HashingEmbedder e;
    EXPECT_EQ(e.embed("red mug on the shelf").values, e.embed("shelf the on mug RED").values);
    EXPECT_EQ(e.embed("Hello, world!").values, e.embed("hello world").values);
}

TEST(HashingEmbedder, RejectsEmptyText) {
    HashingEmbedder e;
    EXPECT_THROW(e.embed(""), EmptyText);
    EXPECT_THROW(e.embed("   \n\t"), EmptyText);
    EXPECT_GT(e.embed("?!").norm(), 0.0);
}

TEST(HashingEmbedder, NormIsPositiveOnRandomText) {
    HashingEmbedder e;
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> ch(33, 126);
    for (int i = 0; i < 200; ++i) {
        std::string s;
        for (int k = 0; k < 1 + i % 40; ++k) s += static_cast<char>(ch(rng));
        EXPECT_GT(e.embed(s).norm(), 0.0) << s;
    }
}

TEST(Cosine, RejectsDimensionMismatch) {
    EmbeddingVector a{{1.0, 0.0}};
    EmbeddingVector b{{1.0, 0.0, 0.0}};
    EXPECT_THROW(cosine(a, b), DimensionMismatch);
}

TEST(RecordReplay, ReplaysByDigestInAnyOrder) {
    TempDir dir;
    const auto session = dir / "session.jsonl";
    auto live = std::make_shared<ScriptedBackend>(
        std::vector<ScriptEntry>{entry("one", "r1"), entry("two", "r2"), entry("three", "r3")});
    {
        auto rec = record_and_replay(session, SessionMode::record, live);
        EXPECT_EQ(rec->complete(bundle("one")), "r1");
        EXPECT_EQ(rec->complete(bundle("two")), "r2");
        EXPECT_EQ(rec->complete(bundle("three")), "r3");
    }
    EXPECT_EQ(read_json_lines(session).size(), 3u);
    auto replay = record_and_replay(session, SessionMode::replay);
    EXPECT_EQ(replay->complete(bundle("three")), "r3");
    EXPECT_EQ(replay->complete(bundle("one")), "r1");
    EXPECT_EQ(replay->complete(bundle("two")), "r2");
    EXPECT_EQ(live->uses(0), 1);
    EXPECT_THROW(replay->complete(bundle("four")), DigestMiss);
}

TEST(RecordReplay, ReplayNeedsExistingSession) {
    EXPECT_THROW(record_and_replay("/nonexistent/session.jsonl", SessionMode::replay), IoFailure);
    TempDir dir;
    EXPECT_THROW(record_and_replay(dir / "s.jsonl", SessionMode::record, nullptr), ConfigError);
}

TEST(Transcript, LogsEveryCallUnderItsTag) {
    ScriptedBackend backend({entry("hello", "hi")});
    Transcript transcript;
    LlmClient client(backend, transcript);
    client.complete(bundle("hello"), "agent");
    client.complete(bundle("hello again"), "policy");
    EXPECT_THROW(client.complete(bundle("nothing"), "sampler"), NoScriptMatch);
    ASSERT_EQ(transcript.size(), 3u);
    EXPECT_EQ(transcript.count("agent"), 1u);
    EXPECT_EQ(transcript.count("sampler"), 1u);
    EXPECT_FALSE(transcript.entries()[2].error.empty());
    EXPECT_THROW(client.complete(bundle(""), "agent"), ConfigError);

    const auto lines = split_lines(transcript.serialize());
    ASSERT_GE(lines.size(), 3u);
    const Json first = Json::parse(lines[0]);
    EXPECT_EQ(first["tag"], "agent");
    EXPECT_EQ(first["response"], "hi");
    EXPECT_EQ(first["digest"], prompt_digest(bundle("hello")));
}

TEST(RemoteBackend, PostsJsonAndReadsText) {
    httplib::Server server;
    Json seen;
    server.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
        seen = Json::parse(req.body);
        res.set_content(Json{{"text", "Final Answer: Option 1"}}.dump(), "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("oops", "text/plain");
    });
    server.Post("/garbled", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{not json", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    RemoteBackend backend(base);
    PromptBundle b = bundle("question", "system");
    b.decoding.stop_sequences = {"\nObservation:"};
    EXPECT_EQ(backend.complete(b), "Final Answer: Option 1");
    EXPECT_EQ(seen["system"], "system");
    EXPECT_EQ(seen["user"], "question");
    EXPECT_EQ(seen["temperature"], 0.0);
    EXPECT_EQ(seen["max_tokens"], 1024);
    EXPECT_EQ(seen["stop"], Json::array({"\nObservation:"}));

    EXPECT_THROW(RemoteBackend(base + "/broken").complete(b), TransportError);
    EXPECT_THROW(RemoteBackend(base + "/garbled").complete(b), TransportError);
    server.stop();
    worker.join();
    EXPECT_THROW(RemoteBackend("http://127.0.0.1:1", 1).complete(b), TransportError);
}
