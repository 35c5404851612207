#include <chrono>
#include <cstdlib>

#include <gtest/gtest.h>

#include "infoneed/error.hpp"
#include "infoneed/hash.hpp"
#include "infoneed/providers.hpp"
#include "infoneed/scorers.hpp"
#include "mock_server.hpp"
#include "test_util.hpp"

using namespace infoneed;
using infoneed::testing::MockServer;

namespace {

EndpointConfig http_config(const std::string& url) {
    EndpointConfig c;
    c.name = "mock";
    c.kind = "http";
    c.base_url = url;
    c.model = "mock-model";
    c.timeout_ms = 2000;
    c.max_retries = 2;
    c.backoff_ms = 1;
    return c;
}

// A loopback port with nothing listening on it.
int dead_port() {
    httplib::Server s;
    const int port = s.bind_to_any_port("127.0.0.1");
    return port;  // the socket closes when `s` goes out of scope
}

}  // namespace

TEST(OfflineProvider, TemplateContainsBothFields) {
    OfflineProvider p;
    GenerationRequest r;
    r.prompt = "Context: robin eggs\nIntent: hatching time\nQuestion:";
    const auto g = p.generate(r);
    EXPECT_EQ(g.text, "what is the hatching time of robin eggs?");
    EXPECT_EQ(g.provider, "offline");
    EXPECT_EQ(p.generate(r).text, g.text);
    r.seed = 1;
    const auto other = p.generate(r).text;
    EXPECT_NE(other.find("robin eggs"), std::string::npos);
    EXPECT_NE(other.find("hatching time"), std::string::npos);
}

TEST(OfflineProvider, WhIntentLeadsTheQuestion) {
    OfflineProvider p;
    GenerationRequest r;
    r.prompt = "Context: robin eggs\nIntent: when do";
    EXPECT_EQ(p.generate(r).text, "when do robin eggs?");
}

TEST(OfflineProvider, MaxTokensAndStops) {
    OfflineProvider p;
    GenerationRequest r;
    r.prompt = "Context: robin eggs\nIntent: hatching time";
    r.max_tokens = 3;
    EXPECT_EQ(p.generate(r).text, "what is the");
    r.max_tokens = 64;
    r.stop = {" of"};
    EXPECT_EQ(p.generate(r).text, "what is the hatching time");
    r.prompt = "  \n ";
    EXPECT_THROW(p.generate(r), ProviderError);
}

TEST(OfflineProvider, EmbeddingsAreDeterministicAndNormalized) {
    OfflineProvider p;
    const auto a = p.embed({"robin eggs"});
    EXPECT_EQ(a, p.embed({"robin eggs"}));
    EXPECT_NEAR(cosine_similarity(a[0], a[0]), 1.0, 1e-12);
    double norm = 0;
    for (double x : a[0].values) norm += x * x;
    EXPECT_NEAR(norm, 1.0, 1e-12);
}

TEST(OfflineProvider, DisjointVocabularyHasZeroCosine) {
    OfflineProvider p;
    const std::vector<std::string> left = {"robin", "eggs"}, right = {"fire", "stone"};
    // the fixture must not collide in the hash buckets
    for (const auto& l : left)
        for (const auto& r : right) ASSERT_NE(fnv1a64(l) % 256, fnv1a64(r) % 256);
    const auto v = p.embed({"robin eggs", "fire stone"});
    EXPECT_EQ(cosine_similarity(v[0], v[1]), 0.0);
}

TEST(OfflineProvider, JaccardPairScore) {
    OfflineProvider p;
    EXPECT_DOUBLE_EQ(p.score_pair("robin eggs hatch", "eggs hatch fast"), 0.5);
    EXPECT_DOUBLE_EQ(p.score_pair("robin eggs", "robin eggs"), 1.0);
    EXPECT_DOUBLE_EQ(p.score_pair("robin eggs", "fire stone"), 0.0);
}

TEST(StopSequences, CutsAtEarliest) {
    EXPECT_EQ(apply_stop_sequences("abc\ndef", {"\n"}), "abc");
    EXPECT_EQ(apply_stop_sequences("a### b\nc", {"\n", "###"}), "a");
    EXPECT_EQ(apply_stop_sequences("plain  ", {}), "plain");
}

TEST(HttpProvider, DeterministicAtTemperatureZero) {
    MockServer mock;
    mock.post_json("/v1/generate", [](const Json& req) {
        // deterministic when temperature is 0; a counter would expose caching bugs otherwise
        static std::atomic<int> calls{0};
        ++calls;
        const double t = req.at("temperature").get<double>();
        const std::string seed = req.contains("seed") ? std::to_string(req["seed"].get<std::uint64_t>()) : "none";
        return Json{{"text", t == 0.0 ? "when do robin eggs hatch?\nextra" : "sampled " + std::to_string(calls.load())},
                    {"seed_seen", seed}};
    });
    mock.start();
    HttpProvider p(http_config(mock.url()));
    GenerationRequest r;
    r.prompt = "Context: robin eggs";
    r.stop = {"\n"};
    r.seed = 5;
    const auto a = p.generate(r);
    EXPECT_EQ(a.text, "when do robin eggs hatch?");
    EXPECT_EQ(a.provider, "mock");
    EXPECT_EQ(p.generate(r).text, a.text);
}

TEST(HttpProvider, SendsRequestFieldsAndAuth) {
    MockServer mock;
    Json seen;
    std::string auth;
    mock.server().Post("/api/v1/generate", [&](const httplib::Request& req, httplib::Response& res) {
        seen = Json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(R"({"text":"ok?"})", "application/json");
    });
    mock.start();
    ::setenv("INFONEED_TEST_TOKEN", "Bearer abc", 1);
    auto cfg = http_config(mock.url() + "/api");
    cfg.auth_header_env = "INFONEED_TEST_TOKEN";
    HttpProvider p(cfg);
    GenerationRequest r;
    r.prompt = "hello";
    r.max_tokens = 7;
    r.seed = 3;
    EXPECT_EQ(p.generate(r).text, "ok?");
    EXPECT_EQ(seen["prompt"], "hello");
    EXPECT_EQ(seen["max_tokens"], 7);
    EXPECT_EQ(seen["seed"], 3);
    EXPECT_EQ(auth, "Bearer abc");
}

TEST(HttpProvider, ClampsOutOfRangeScores) {
    MockServer mock;
    mock.post_json("/v1/score", [](const Json& req) {
        return Json{{"score", req["a"] == "high" ? 1.7 : (req["a"] == "low" ? -0.2 : 0.25)}};
    });
    mock.start();
    HttpProvider p(http_config(mock.url()));
    EXPECT_EQ(p.score_pair("high", "x"), 1.0);
    EXPECT_EQ(p.score_pair("low", "x"), 0.0);
    EXPECT_EQ(p.score_pair("mid", "x"), 0.25);
    EXPECT_EQ(p.clamped_scores(), 2u);
}

TEST(HttpProvider, EmbedChecksShape) {
    MockServer mock;
    mock.post_json("/v1/embed", [](const Json& req) {
        Json vectors = Json::array();
        for (std::size_t i = 0; i < req["texts"].size(); ++i) vectors.push_back({1.0, static_cast<double>(i)});
        if (req["texts"][0] == "ragged") vectors.push_back({1.0});
        return Json{{"vectors", vectors}};
    });
    mock.start();
    HttpProvider p(http_config(mock.url()));
    const auto v = p.embed({"a", "b"});
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[1].values, (std::vector<double>{1.0, 1.0}));
    EXPECT_THROW(p.embed({"ragged"}), ProviderError);
}

TEST(HttpProvider, NonSuccessStatusFailsWithoutRetry) {
    MockServer mock;
    std::atomic<int> calls{0};
    mock.server().Post("/v1/generate", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 500;
        res.set_content("model exploded", "text/plain");
    });
    mock.start();
    HttpProvider p(http_config(mock.url()));
    try {
        p.generate({"x"});
        FAIL() << "expected ProviderError";
    } catch (const ProviderError& e) {
        EXPECT_NE(std::string(e.what()).find("model exploded"), std::string::npos);
        EXPECT_FALSE(e.retryable());
    }
    EXPECT_EQ(calls.load(), 1);
}

TEST(HttpProvider, UnreachableEndpointFailsAfterRetries) {
    auto cfg = http_config("http://127.0.0.1:" + std::to_string(dead_port()));
    cfg.max_retries = 3;
    cfg.backoff_ms = 20;
    HttpProvider p(cfg);
    const auto start = std::chrono::steady_clock::now();
    try {
        p.generate({"x"});
        FAIL() << "expected ProviderError";
    } catch (const ProviderError& e) {
        EXPECT_TRUE(e.retryable());
    }
    // backoff 20 + 40 ms between the three attempts
    EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(55));
    EXPECT_FALSE(p.reachable());
}

TEST(FallbackProvider, AnswersOfflineWhenPrimaryIsDown) {
    auto cfg = http_config("http://127.0.0.1:" + std::to_string(dead_port()));
    cfg.max_retries = 1;
    cfg.fallback = true;
    auto p = make_provider(cfg);
    GenerationRequest r;
    r.prompt = "Context: robin eggs\nIntent: hatching time";
    const auto g = p->generate(r);
    EXPECT_EQ(g.text, "what is the hatching time of robin eggs?");
    EXPECT_EQ(g.provider, "offline");
    EXPECT_DOUBLE_EQ(p->score_pair("robin eggs hatch", "eggs hatch fast"), 0.5);
    EXPECT_EQ(dynamic_cast<FallbackProvider&>(*p).fallbacks_used(), 2u);
}

TEST(ProviderConfig, LoadsBothShapesAndRegistryHasOffline) {
    infoneed::testing::TempDir tmp;
    write_file(tmp / "one.json", R"({"name":"gen","kind":"http","base_url":"http://localhost:1","fallback":true})");
    write_file(tmp / "many.json", R"({"providers":[{"name":"a","kind":"offline"},{"name":"b","kind":"offline","embedding_dim":64}]})");
    const auto one = load_provider_config(tmp / "one.json");
    ASSERT_EQ(one.size(), 1u);
    EXPECT_TRUE(one[0].fallback);
    const auto many = load_provider_config(tmp / "many.json");
    ASSERT_EQ(many.size(), 2u);
    EXPECT_EQ(endpoint_from_json(endpoint_to_json(many[1])).embedding_dim, 64);
    ProviderRegistry reg(many);
    EXPECT_TRUE(reg.contains("offline"));
    EXPECT_TRUE(reg.contains("b"));
    EXPECT_THROW(reg.get("missing"), ValidationError);
    write_file(tmp / "bad.json", R"({"name":"x","kind":"ftp"})");
    EXPECT_THROW(load_provider_config(tmp / "bad.json"), Error);
}
