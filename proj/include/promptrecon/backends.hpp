// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Black-box backends used by the attack loop: a multimodal LLM that writes
// prompts, a text-to-image service and an image embedder. Each has an
// in-process mock driven by a JSON script and an HTTP+JSON client.
//
// Clients hold no per-session state, so one instance may serve concurrent
// sessions. Failures surface as Error(kBackend).

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace promptrecon::backends {

struct TokenUsage {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;

  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct LlmReply {
  std::string prompt;
  TokenUsage usage;
};

class MultimodalLlmClient {
 public:
  virtual ~MultimodalLlmClient() = default;
  virtual LlmReply generate(std::string_view instruction, std::span<const std::string> images) = 0;
};

class TextToImageClient {
 public:
  virtual ~TextToImageClient() = default;
  /// Returns `n` image handles (URLs, data strings or mock handles).
  virtual std::vector<std::string> generate(std::string_view prompt, std::size_t n) = 0;
  /// The pricing key of this service, e.g. "midjourney".
  virtual std::string_view backend_name() const = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<float> embed(std::string_view image_handle) = 0;
};

// ---------------------------------------------------------------------------
// Mocks

/// One scripted LLM step. `retry` answers the corrective re-ask when `prompt`
/// fails validation; without it the same prompt is repeated.
struct MockStep {
  std::string prompt;
  std::optional<std::string> retry;
  std::optional<TokenUsage> usage;
};

/// Script file layout:
///   {"seed": 7, "dim": 64, "variant_noise": 0.05,
///    "steps": [{"prompt": "...", "retry": "...",
///               "usage": {"input_tokens": 900, "output_tokens": 381}}, ...]}
struct MockScript {
  std::uint64_t seed = 0;
  std::size_t dim = 64;
  double variant_noise = 0.05;
  std::vector<MockStep> steps;

  static MockScript from_json(const nlohmann::json& j);
  static MockScript load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

/// Marks the corrective suffix appended to an instruction after a rejected
/// candidate. The mock LLM keys its `retry` answers on it.
extern const std::string_view kCorrectiveMarker;

/// Picks its step from the instruction alone: step 0 when no scripted prompt
/// appears in it, otherwise one past the last step whose prompt (or retry) is
/// quoted. The final step repeats once the script runs out. Usage defaults to
/// whitespace token counts of the instruction and reply.
class MockLlm final : public MultimodalLlmClient {
 public:
  explicit MockLlm(MockScript script);
  LlmReply generate(std::string_view instruction, std::span<const std::string> images) override;

 private:
  MockScript script_;
};

/// Returns handles "mock:<variant>:<prompt>".
class MockTextToImage final : public TextToImageClient {
 public:
  explicit MockTextToImage(std::string backend = "midjourney");
  std::vector<std::string> generate(std::string_view prompt, std::size_t n) override;
  std::string_view backend_name() const override { return backend_; }

 private:
  std::string backend_;
};

/// Seeded bag-of-words projection: every keyword term maps to a fixed
/// Gaussian direction, the image vector is their normalized sum plus
/// `variant_noise` times a per-variant direction. A "mock:" handle embeds its
/// prompt; any other handle is read as a UTF-8 file whose content is the
/// hidden prompt of a target image.
class MockEmbedder final : public EmbeddingProvider {
 public:
  MockEmbedder(std::uint64_t seed, std::size_t dim, double variant_noise);
  explicit MockEmbedder(const MockScript& script)
      : MockEmbedder(script.seed, script.dim, script.variant_noise) {}

  std::vector<float> embed(std::string_view image_handle) override;
  /// The embedding of a prompt rendered as variant `variant`.
  std::vector<float> embed_prompt(std::string_view prompt, std::uint64_t variant) const;

 private:
  std::uint64_t seed_;
  std::size_t dim_;
  double variant_noise_;
};

// ---------------------------------------------------------------------------
// HTTP clients

struct RetryPolicy {
  std::size_t max_retries = 5;
  std::chrono::milliseconds base_delay{250};
  std::chrono::milliseconds max_delay{8000};

  /// Full jitter: uniform in [0, min(max_delay, base_delay * 2^attempt)].
  std::chrono::milliseconds delay(std::size_t attempt, std::mt19937_64& rng) const;
  static RetryPolicy from_json(const nlohmann::json& j);
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Where and how to reach one endpoint. The base URL and bearer token are read
/// from the named environment variables when those are set.
struct Endpoint {
  std::string base_url;
  std::string base_url_env;
  std::string api_key_env;
  std::string path;
  std::chrono::milliseconds timeout{60000};

  std::string resolved_base_url() const;
  std::optional<std::string> api_key() const;
  static Endpoint from_json(const nlohmann::json& j, std::string_view default_base_env,
                            std::string_view default_key_env, std::string_view default_path);
};

/// POSTs JSON and retries transport failures, 429 and 5xx with backoff.
/// Any other non-2xx status fails at once.
class JsonPoster {
 public:
  JsonPoster(Endpoint endpoint, RetryPolicy retry, Sleeper sleeper = {}, std::uint64_t jitter_seed = 0);
  nlohmann::json post(const nlohmann::json& body) const;

  const Endpoint& endpoint() const noexcept { return endpoint_; }

 private:
  Endpoint endpoint_;
  RetryPolicy retry_;
  Sleeper sleeper_;
  std::uint64_t jitter_seed_;
};

/// Wire contract: POST {model, instruction, images} ->
/// {prompt, usage: {input_tokens, output_tokens}}. Local image files are sent
/// as base64 data URLs; other handles pass through.
class HttpLlmClient final : public MultimodalLlmClient {
 public:
  HttpLlmClient(JsonPoster poster, std::string model);
  LlmReply generate(std::string_view instruction, std::span<const std::string> images) override;

 private:
  JsonPoster poster_;
  std::string model_;
};

/// Wire contract: POST {prompt, n, size} -> {images: [url | base64]}.
class HttpTextToImage final : public TextToImageClient {
 public:
  HttpTextToImage(JsonPoster poster, std::string backend, std::string size);
  std::vector<std::string> generate(std::string_view prompt, std::size_t n) override;
  std::string_view backend_name() const override { return backend_; }

 private:
  JsonPoster poster_;
  std::string backend_;
  std::string size_;
};

/// Wire contract: POST {image} -> {embedding: [float]}.
class HttpEmbedder final : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(JsonPoster poster);
  std::vector<float> embed(std::string_view image_handle) override;

 private:
  JsonPoster poster_;
};

/// Encodes a handle for the wire: existing local files become
/// "data:<mime>;base64,..." and anything else is returned unchanged.
std::string encode_image_handle(const std::string& handle);

// ---------------------------------------------------------------------------
// Configuration

struct BackendSet {
  std::unique_ptr<MultimodalLlmClient> llm;
  std::unique_ptr<TextToImageClient> t2i;
  std::unique_ptr<EmbeddingProvider> embedder;
};

/// Builds clients from a backend config:
///   {"mock_script": "script.json",             (relative to `base_dir`)
///    "retry": {"max_retries": 5, "base_delay_ms": 250, "max_delay_ms": 8000},
///    "llm": {"kind": "mock" | "http", "model": ..., endpoint fields},
///    "t2i": {"kind": ..., "backend": "midjourney", "size": "1024x1024", ...},
///    "embedder": {"kind": ..., endpoint fields}}
/// Endpoint fields are base_url, base_url_env, api_key_env, path and
/// timeout_ms. Errors: kParse, kInvalidArgument, kIo.
BackendSet make_backends(const nlohmann::json& config, const std::filesystem::path& base_dir,
                         std::uint64_t seed, Sleeper sleeper = {});

/// A local HTTP server answering the three wire contracts from a mock script.
/// Routes: POST /v1/prompt, /v1/images and /v1/embeddings. Optionally fails
/// the first `fail_first` requests with HTTP 503 to exercise retries.
class MockServer {
 public:
  explicit MockServer(MockScript script, std::size_t fail_first = 0);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds to host:port (port 0 picks a free one) and serves on a background
  /// thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();
  std::size_t requests_served() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace promptrecon::backends
