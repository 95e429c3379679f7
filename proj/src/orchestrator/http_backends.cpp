// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <thread>

#include "promptrecon/backends.hpp"
#include "promptrecon/error.hpp"

namespace promptrecon::backends {

std::chrono::milliseconds RetryPolicy::delay(std::size_t attempt, std::mt19937_64& rng) const {
  const auto cap = max_delay.count();
  std::int64_t ceiling = base_delay.count();
  for (std::size_t i = 0; i < attempt && ceiling < cap; ++i) ceiling *= 2;
  ceiling = std::min<std::int64_t>(ceiling, cap);
  std::uniform_int_distribution<std::int64_t> pick(0, std::max<std::int64_t>(ceiling, 0));
  return std::chrono::milliseconds(pick(rng));
}

RetryPolicy RetryPolicy::from_json(const nlohmann::json& j) {
  RetryPolicy r;
  r.max_retries = j.value("max_retries", r.max_retries);
  r.base_delay = std::chrono::milliseconds(j.value("base_delay_ms", std::int64_t{r.base_delay.count()}));
  r.max_delay = std::chrono::milliseconds(j.value("max_delay_ms", std::int64_t{r.max_delay.count()}));
  if (r.base_delay.count() < 0 || r.max_delay.count() < 0) {
    throw Error(ErrorCode::kInvalidArgument, "retry delays must be non-negative");
  }
  return r;
}

namespace {

std::optional<std::string> env(const std::string& name) {
  if (name.empty()) return std::nullopt;
  const char* v = std::getenv(name.c_str());
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace

std::string Endpoint::resolved_base_url() const {
  if (auto v = env(base_url_env)) return *v;
  if (base_url.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "no base URL: set " + (base_url_env.empty() ? std::string("base_url") : base_url_env));
  }
  return base_url;
}

std::optional<std::string> Endpoint::api_key() const { return env(api_key_env); }

Endpoint Endpoint::from_json(const nlohmann::json& j, std::string_view default_base_env,
                             std::string_view default_key_env, std::string_view default_path) {
  Endpoint e;
  e.base_url = j.value("base_url", std::string());
  e.base_url_env = j.value("base_url_env", std::string(default_base_env));
  e.api_key_env = j.value("api_key_env", std::string(default_key_env));
  e.path = j.value("path", std::string(default_path));
  e.timeout = std::chrono::milliseconds(j.value("timeout_ms", std::int64_t{60000}));
  return e;
}

JsonPoster::JsonPoster(Endpoint endpoint, RetryPolicy retry, Sleeper sleeper, std::uint64_t jitter_seed)
    : endpoint_(std::move(endpoint)), retry_(retry), sleeper_(std::move(sleeper)), jitter_seed_(jitter_seed) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

nlohmann::json JsonPoster::post(const nlohmann::json& body) const {
  const auto base = endpoint_.resolved_base_url();
  httplib::Client client(base);
  const auto secs = endpoint_.timeout.count() / 1000;
  const auto usecs = (endpoint_.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (auto key = endpoint_.api_key()) headers.emplace("Authorization", "Bearer " + *key);
  const auto payload = body.dump();
  std::mt19937_64 jitter(jitter_seed_);

  std::string last_failure;
  for (std::size_t attempt = 0;; ++attempt) {
    auto res = client.Post(endpoint_.path, headers, payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::kBackend, base + endpoint_.path + " returned invalid JSON: " + e.what());
      }
    }
    if (res) {
      last_failure = "HTTP " + std::to_string(res->status);
      if (res->status != 429 && res->status < 500) {
        throw Error(ErrorCode::kBackend, base + endpoint_.path + " failed with " + last_failure);
      }
    } else {
      last_failure = httplib::to_string(res.error());
    }
    if (attempt >= retry_.max_retries) break;
    sleeper_(retry_.delay(attempt, jitter));
  }
  throw Error(ErrorCode::kBackend, base + endpoint_.path + " failed after " + std::to_string(retry_.max_retries) +
                                       " retries: " + last_failure);
}

namespace {

std::string mime_of(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "application/octet-stream";
}

template <typename T>
T field(const nlohmann::json& j, const char* key, std::string_view what) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBackend, std::string(what) + " response lacks a valid '" + key + "': " + e.what());
  }
}

}  // namespace

std::string encode_image_handle(const std::string& handle) {
  if (handle.find("://") != std::string::npos || handle.starts_with("data:") || handle.starts_with("mock:")) {
    return handle;
  }
  const std::filesystem::path path(handle);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return handle;
  std::ifstream in(path, std::ios::binary);
  const std::string bytes(std::istreambuf_iterator<char>(in), {});
  return "data:" + mime_of(path) + ";base64," + httplib::detail::base64_encode(bytes);
}

HttpLlmClient::HttpLlmClient(JsonPoster poster, std::string model) : poster_(std::move(poster)), model_(std::move(model)) {}

LlmReply HttpLlmClient::generate(std::string_view instruction, std::span<const std::string> images) {
  nlohmann::json body{{"model", model_}, {"instruction", instruction}, {"images", nlohmann::json::array()}};
  for (const auto& h : images) body["images"].push_back(encode_image_handle(h));
  const auto res = poster_.post(body);
  LlmReply reply;
  reply.prompt = field<std::string>(res, "prompt", "LLM");
  const auto usage = field<nlohmann::json>(res, "usage", "LLM");
  reply.usage = {field<std::uint64_t>(usage, "input_tokens", "LLM"), field<std::uint64_t>(usage, "output_tokens", "LLM")};
  return reply;
}

HttpTextToImage::HttpTextToImage(JsonPoster poster, std::string backend, std::string size)
    : poster_(std::move(poster)), backend_(std::move(backend)), size_(std::move(size)) {}

std::vector<std::string> HttpTextToImage::generate(std::string_view prompt, std::size_t n) {
  const auto res = poster_.post({{"prompt", prompt}, {"n", n}, {"size", size_}});
  auto images = field<std::vector<std::string>>(res, "images", "text-to-image");
  if (images.empty()) throw Error(ErrorCode::kBackend, "text-to-image response has no images");
  return images;
}

HttpEmbedder::HttpEmbedder(JsonPoster poster) : poster_(std::move(poster)) {}

std::vector<float> HttpEmbedder::embed(std::string_view image_handle) {
  const auto res = poster_.post({{"image", encode_image_handle(std::string(image_handle))}});
  auto v = field<std::vector<float>>(res, "embedding", "embedding");
  if (v.empty()) throw Error(ErrorCode::kBackend, "embedding response is empty");
  return v;
}

// ---------------------------------------------------------------------------

BackendSet make_backends(const nlohmann::json& config, const std::filesystem::path& base_dir, std::uint64_t seed,
                         Sleeper sleeper) {
  BackendSet set;
  try {
    std::optional<MockScript> script;
    auto need_script = [&]() -> const MockScript& {
      if (!script) {
        if (!config.contains("mock_script")) throw Error(ErrorCode::kInvalidArgument, "mock backends need 'mock_script'");
        std::filesystem::path p = config.at("mock_script").get<std::string>();
        script = MockScript::load(p.is_relative() ? base_dir / p : p);
      }
      return *script;
    };
    const auto retry = RetryPolicy::from_json(config.value("retry", nlohmann::json::object()));
    auto kind_of = [&](const char* key) {
      const auto& c = config.at(key);
      const auto kind = c.value("kind", std::string("mock"));
      if (kind != "mock" && kind != "http") throw Error(ErrorCode::kInvalidArgument, std::string(key) + ": unknown kind " + kind);
      return std::pair<const nlohmann::json&, bool>(c, kind == "mock");
    };

    const auto [llm, llm_mock] = kind_of("llm");
    if (llm_mock) {
      set.llm = std::make_unique<MockLlm>(need_script());
    } else {
      set.llm = std::make_unique<HttpLlmClient>(
          JsonPoster(Endpoint::from_json(llm, "LLM_BASE_URL", "LLM_API_KEY", "/v1/prompt"), retry, sleeper, seed),
          llm.value("model", std::string("gpt-4-vision-preview")));
    }

    const auto [t2i, t2i_mock] = kind_of("t2i");
    const auto backend = t2i.value("backend", std::string("midjourney"));
    if (t2i_mock) {
      set.t2i = std::make_unique<MockTextToImage>(backend);
    } else {
      set.t2i = std::make_unique<HttpTextToImage>(
          JsonPoster(Endpoint::from_json(t2i, "T2I_BASE_URL", "T2I_API_KEY", "/v1/images"), retry, sleeper, seed + 1),
          backend, t2i.value("size", std::string("1024x1024")));
    }

    const auto [emb, emb_mock] = kind_of("embedder");
    if (emb_mock) {
      set.embedder = std::make_unique<MockEmbedder>(need_script());
    } else {
      set.embedder = std::make_unique<HttpEmbedder>(
          JsonPoster(Endpoint::from_json(emb, "EMBED_BASE_URL", "EMBED_API_KEY", "/v1/embeddings"), retry, sleeper,
                     seed + 2));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("backend config: ") + e.what());
  }
  return set;
}

// ---------------------------------------------------------------------------

struct MockServer::Impl {
  explicit Impl(MockScript s, std::size_t fail)
      : llm(s), embedder(s), fail_first(fail) {}

  httplib::Server server;
  MockLlm llm;
  MockTextToImage t2i{"mock"};
  MockEmbedder embedder;
  std::size_t fail_first;
  std::atomic<std::size_t> seen{0};
  std::atomic<std::size_t> served{0};
  std::thread thread;
};

MockServer::MockServer(MockScript script, std::size_t fail_first)
    : impl_(std::make_unique<Impl>(std::move(script), fail_first)) {
  auto route = [this](const std::string& path, std::function<nlohmann::json(const nlohmann::json&)> handler) {
    impl_->server.Post(path, [this, handler](const httplib::Request& req, httplib::Response& res) {
      if (impl_->seen.fetch_add(1) < impl_->fail_first) {
        res.status = 503;
        return;
      }
      try {
        const auto body = nlohmann::json::parse(req.body);
        res.set_content(handler(body).dump(), "application/json");
        ++impl_->served;
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
    });
  };
  route("/v1/prompt", [this](const nlohmann::json& b) {
    const auto images = b.value("images", std::vector<std::string>{});
    const auto reply = impl_->llm.generate(b.at("instruction").get<std::string>(), images);
    return nlohmann::json{{"prompt", reply.prompt},
                          {"usage", {{"input_tokens", reply.usage.input_tokens}, {"output_tokens", reply.usage.output_tokens}}}};
  });
  route("/v1/images", [this](const nlohmann::json& b) {
    return nlohmann::json{{"images", impl_->t2i.generate(b.at("prompt").get<std::string>(), b.value("n", std::size_t{1}))}};
  });
  route("/v1/embeddings", [this](const nlohmann::json& b) {
    return nlohmann::json{{"embedding", impl_->embedder.embed(b.at("image").get<std::string>())}};
  });
}

MockServer::~MockServer() { stop(); }

int MockServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIo, "mock server cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void MockServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(ErrorCode::kIo, "mock server cannot listen on " + host + ":" + std::to_string(port));
}

void MockServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::size_t MockServer::requests_served() const { return impl_->served.load(); }

}  // namespace promptrecon::backends
