// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/backends.hpp"

#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "mock_attack.hpp"
#include "promptrecon/error.hpp"
#include "promptrecon/orchestrator.hpp"

namespace promptrecon::backends {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::kInvalidArgument;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("promptrecon_backends_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct SleepLog {
  std::vector<std::chrono::milliseconds> sleeps;
  Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { sleeps.push_back(d); };
  }
};

Endpoint endpoint_for(int port, const std::string& path) {
  Endpoint e;
  e.base_url = "http://127.0.0.1:" + std::to_string(port);
  e.path = path;
  e.timeout = std::chrono::milliseconds(5000);
  return e;
}

TEST(RetryPolicyTest, DelayStaysWithinJitterWindow) {
  RetryPolicy p;
  std::mt19937_64 rng(1);
  for (std::size_t attempt = 0; attempt < 12; ++attempt) {
    const auto window = std::min<std::int64_t>(p.max_delay.count(), p.base_delay.count() << attempt);
    for (int i = 0; i < 200; ++i) {
      const auto d = p.delay(attempt, rng).count();
      EXPECT_GE(d, 0);
      EXPECT_LE(d, window);
    }
  }
  const auto j = RetryPolicy::from_json(nlohmann::json{{"max_retries", 2}, {"base_delay_ms", 10}});
  EXPECT_EQ(j.max_retries, 2u);
  EXPECT_EQ(j.base_delay.count(), 10);
  EXPECT_EQ(j.max_delay.count(), 8000);
}

TEST(MockScriptTest, JsonRoundTripAndErrors) {
  const auto s = testing::improving_script();
  const auto back = MockScript::from_json(nlohmann::json::parse(s.to_json().dump()));
  EXPECT_EQ(back.to_json(), s.to_json());
  EXPECT_EQ(code_of([] { MockScript::from_json(nlohmann::json{{"steps", nlohmann::json::array()}}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { MockScript::from_json(nlohmann::json{{"seed", 1}}); }), ErrorCode::kParse);
  EXPECT_EQ(code_of([] { MockScript::load("/nonexistent/script.json"); }), ErrorCode::kIo);
}

TEST(EncodeImageHandleTest, FilesBecomeDataUrls) {
  const auto dir = temp_dir("encode");
  std::ofstream(dir / "a.png", std::ios::binary) << "abc";
  EXPECT_EQ(encode_image_handle((dir / "a.png").string()), "data:image/png;base64,YWJj");
  EXPECT_EQ(encode_image_handle("https://x/y.png"), "https://x/y.png");
  EXPECT_EQ(encode_image_handle("mock:0:fox"), "mock:0:fox");
}

TEST(HttpClientsTest, WireContractsAgainstMockServer) {
  const auto script = testing::improving_script();
  MockServer server(script);
  const int port = server.start();
  HttpLlmClient llm(JsonPoster(endpoint_for(port, "/v1/prompt"), {}), "test-model");
  HttpTextToImage t2i(JsonPoster(endpoint_for(port, "/v1/images"), {}), "midjourney", "1024x1024");
  HttpEmbedder embedder(JsonPoster(endpoint_for(port, "/v1/embeddings"), {}));

  const auto reply = llm.generate("initial", std::vector<std::string>{"mock:0:x"});
  EXPECT_EQ(reply.prompt, script.steps[0].prompt);
  EXPECT_EQ(reply.usage, (TokenUsage{900, 381}));
  const auto images = t2i.generate("a fox", 3);
  EXPECT_EQ(images, (std::vector<std::string>{"mock:0:a fox", "mock:1:a fox", "mock:2:a fox"}));
  EXPECT_EQ(embedder.embed("mock:1:a fox"), MockEmbedder(script).embed("mock:1:a fox"));
  EXPECT_EQ(server.requests_served(), 3u);
}

TEST(HttpClientsTest, SessionMatchesInProcessMocks) {
  const auto script = testing::improving_script();
  // Mock handles pass through the wire unchanged; local files would be sent
  // as data URLs, which the mock server does not decode.
  const std::vector<std::string> targets = {"mock:100:" + testing::kHiddenPrompt, "mock:101:" + testing::kHiddenPrompt};
  MockServer server(script);
  const int port = server.start();
  HttpLlmClient http_llm(JsonPoster(endpoint_for(port, "/v1/prompt"), {}), "m");
  HttpTextToImage http_t2i(JsonPoster(endpoint_for(port, "/v1/images"), {}), "midjourney", "1024x1024");
  HttpEmbedder http_embedder(JsonPoster(endpoint_for(port, "/v1/embeddings"), {}));
  const auto over_http =
      orchestrator::run_attack(targets, testing::fox_seeds(), {http_llm, http_t2i, http_embedder}, {});

  MockLlm llm(script);
  MockTextToImage t2i("midjourney");
  MockEmbedder embedder(script);
  const auto in_process = orchestrator::run_attack(targets, testing::fox_seeds(), {llm, t2i, embedder}, {});
  EXPECT_EQ(over_http.rounds.size(), 4u);
  EXPECT_EQ(over_http.to_json().dump(), in_process.to_json().dump());
}

TEST(JsonPosterTest, RetriesServerErrorsWithBackoff) {
  MockServer server(testing::improving_script(), 2);
  const int port = server.start();
  SleepLog log;
  RetryPolicy retry;
  JsonPoster poster(endpoint_for(port, "/v1/images"), retry, log.sleeper(), 3);
  const auto res = poster.post({{"prompt", "p"}, {"n", 1}, {"size", "s"}});
  EXPECT_EQ(res.at("images").size(), 1u);
  ASSERT_EQ(log.sleeps.size(), 2u);
  EXPECT_LE(log.sleeps[0].count(), retry.base_delay.count());
  EXPECT_LE(log.sleeps[1].count(), 2 * retry.base_delay.count());
}

TEST(JsonPosterTest, GivesUpAfterMaxRetries) {
  MockServer server(testing::improving_script(), 100);
  const int port = server.start();
  SleepLog log;
  JsonPoster poster(endpoint_for(port, "/v1/images"), RetryPolicy{}, log.sleeper());
  EXPECT_EQ(code_of([&] { poster.post({{"prompt", "p"}}); }), ErrorCode::kBackend);
  EXPECT_EQ(log.sleeps.size(), 5u);
}

TEST(JsonPosterTest, ClientErrorsAreNotRetried) {
  MockServer server(testing::improving_script());
  const int port = server.start();
  SleepLog log;
  JsonPoster missing_route(endpoint_for(port, "/v1/nothing"), RetryPolicy{}, log.sleeper());
  EXPECT_EQ(code_of([&] { missing_route.post({{"prompt", "p"}}); }), ErrorCode::kBackend);
  JsonPoster bad_body(endpoint_for(port, "/v1/images"), RetryPolicy{}, log.sleeper());
  EXPECT_EQ(code_of([&] { bad_body.post({{"no_prompt", 1}}); }), ErrorCode::kBackend);
  EXPECT_TRUE(log.sleeps.empty());
}

TEST(JsonPosterTest, ConnectionFailuresAreRetried) {
  SleepLog log;
  RetryPolicy retry;
  retry.max_retries = 2;
  Endpoint e = endpoint_for(1, "/v1/prompt");
  e.timeout = std::chrono::milliseconds(200);
  JsonPoster poster(e, retry, log.sleeper());
  EXPECT_EQ(code_of([&] { poster.post({}); }), ErrorCode::kBackend);
  EXPECT_EQ(log.sleeps.size(), 2u);
}

TEST(EndpointTest, EnvironmentOverridesConfig) {
  MockServer server(testing::improving_script());
  const int port = server.start();
  ::setenv("PROMPTRECON_TEST_BASE", ("http://127.0.0.1:" + std::to_string(port)).c_str(), 1);
  const auto e = Endpoint::from_json(nlohmann::json{{"base_url", "http://127.0.0.1:1"},
                                                    {"base_url_env", "PROMPTRECON_TEST_BASE"}},
                                     "X", "Y", "/v1/images");
  EXPECT_EQ(e.resolved_base_url(), "http://127.0.0.1:" + std::to_string(port));
  EXPECT_EQ(JsonPoster(e, {}).post({{"prompt", "p"}}).at("images").size(), 1u);
  ::unsetenv("PROMPTRECON_TEST_BASE");
  EXPECT_EQ(e.resolved_base_url(), "http://127.0.0.1:1");
  Endpoint none;
  EXPECT_EQ(code_of([&] { none.resolved_base_url(); }), ErrorCode::kInvalidArgument);
}

TEST(MakeBackendsTest, MockAndHttpKinds) {
  const auto dir = temp_dir("config");
  std::ofstream(dir / "script.json") << testing::improving_script().to_json().dump();
  const auto mocks = make_backends(
      nlohmann::json{{"mock_script", "script.json"}, {"llm", {{"kind", "mock"}}}, {"t2i", {{"kind", "mock"}, {"backend", "dalle3"}}},
                     {"embedder", {{"kind", "mock"}}}},
      dir, 1);
  EXPECT_EQ(mocks.t2i->backend_name(), "dalle3");
  EXPECT_EQ(mocks.llm->generate("x", {}).prompt, testing::improving_script().steps[0].prompt);

  const auto http = make_backends(nlohmann::json{{"llm", {{"kind", "http"}, {"base_url", "http://127.0.0.1:9"}}},
                                                 {"t2i", {{"kind", "http"}, {"base_url", "http://127.0.0.1:9"}}},
                                                 {"embedder", {{"kind", "http"}, {"base_url", "http://127.0.0.1:9"}}}},
                                  dir, 1);
  EXPECT_EQ(http.t2i->backend_name(), "midjourney");

  EXPECT_EQ(code_of([&] { make_backends(nlohmann::json{{"llm", {{"kind", "carrier-pigeon"}}}}, dir, 1); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] {
              make_backends(nlohmann::json{{"llm", {{"kind", "mock"}}}, {"t2i", {{"kind", "mock"}}},
                                           {"embedder", {{"kind", "mock"}}}},
                            dir, 1);
            }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { make_backends(nlohmann::json::object(), dir, 1); }), ErrorCode::kParse);
}

}  // namespace
}  // namespace promptrecon::backends
