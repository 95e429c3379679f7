// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>

#include "promptrecon/backends.hpp"
#include "promptrecon/bank.hpp"
#include "promptrecon/error.hpp"
#include "promptrecon/tokenizer.hpp"

namespace promptrecon::backends {

const std::string_view kCorrectiveMarker = "CORRECTION:";

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::optional<TokenUsage> usage_from_json(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  const auto& u = j.at(key);
  return TokenUsage{u.at("input_tokens").get<std::uint64_t>(), u.at("output_tokens").get<std::uint64_t>()};
}

}  // namespace

MockScript MockScript::from_json(const nlohmann::json& j) {
  MockScript s;
  try {
    s.seed = j.value("seed", std::uint64_t{0});
    s.dim = j.value("dim", std::size_t{64});
    s.variant_noise = j.value("variant_noise", 0.05);
    for (const auto& step : j.at("steps")) {
      MockStep m;
      m.prompt = step.at("prompt").get<std::string>();
      if (step.contains("retry")) m.retry = step.at("retry").get<std::string>();
      m.usage = usage_from_json(step, "usage");
      s.steps.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("mock script: ") + e.what());
  }
  if (s.steps.empty()) throw Error(ErrorCode::kInvalidArgument, "mock script has no steps");
  if (s.dim == 0) throw Error(ErrorCode::kInvalidArgument, "mock script dim must be positive");
  if (!(s.variant_noise >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "mock script variant_noise must be >= 0");
  return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open mock script " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json MockScript::to_json() const {
  nlohmann::ordered_json j{{"seed", seed}, {"dim", dim}, {"variant_noise", variant_noise}};
  j["steps"] = nlohmann::ordered_json::array();
  for (const auto& s : steps) {
    nlohmann::ordered_json step{{"prompt", s.prompt}};
    if (s.retry) step["retry"] = *s.retry;
    if (s.usage) step["usage"] = {{"input_tokens", s.usage->input_tokens}, {"output_tokens", s.usage->output_tokens}};
    j["steps"].push_back(std::move(step));
  }
  return j;
}

MockLlm::MockLlm(MockScript script) : script_(std::move(script)) {
  if (script_.steps.empty()) throw Error(ErrorCode::kInvalidArgument, "mock script has no steps");
}

LlmReply MockLlm::generate(std::string_view instruction, std::span<const std::string> /*images*/) {
  const auto marker = instruction.find(kCorrectiveMarker);
  const auto body = instruction.substr(0, marker);
  std::size_t next = 0;
  for (std::size_t i = 0; i < script_.steps.size(); ++i) {
    const auto& s = script_.steps[i];
    const bool quoted = body.find(s.prompt) != std::string_view::npos ||
                        (s.retry && body.find(*s.retry) != std::string_view::npos);
    if (quoted) next = i + 1;
  }
  const auto& step = script_.steps[std::min(next, script_.steps.size() - 1)];
  LlmReply reply;
  reply.prompt = marker != std::string_view::npos && step.retry ? *step.retry : step.prompt;
  reply.usage = step.usage ? *step.usage
                           : TokenUsage{split_whitespace(instruction).size(), split_whitespace(reply.prompt).size()};
  return reply;
}

MockTextToImage::MockTextToImage(std::string backend) : backend_(std::move(backend)) {}

std::vector<std::string> MockTextToImage::generate(std::string_view prompt, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("mock:" + std::to_string(i) + ":" + std::string(prompt));
  return out;
}

MockEmbedder::MockEmbedder(std::uint64_t seed, std::size_t dim, double variant_noise)
    : seed_(seed), dim_(dim), variant_noise_(variant_noise) {
  if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "mock embedder dim must be positive");
}

std::vector<float> MockEmbedder::embed_prompt(std::string_view prompt, std::uint64_t variant) const {
  std::vector<double> acc(dim_, 0.0);
  // Adds `weight` times a unit-length Gaussian direction keyed by `key`.
  auto add_direction = [&](std::uint64_t key, double weight) {
    std::mt19937_64 rng(seed_ ^ key);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> d(dim_);
    double sq = 0.0;
    for (auto& x : d) {
      x = g(rng);
      sq += x * x;
    }
    const double scale = weight / std::sqrt(sq);
    for (std::size_t i = 0; i < dim_; ++i) acc[i] += scale * d[i];
  };
  auto terms = bank::keyword_terms(prompt);
  if (terms.empty()) terms.emplace_back();
  for (const auto& t : terms) add_direction(fnv1a(t), 1.0);
  double norm = 0.0;
  for (double a : acc) norm += a * a;
  const double scale = 1.0 / std::sqrt(norm);
  for (auto& a : acc) a *= scale;
  if (variant_noise_ > 0.0) add_direction(fnv1a("#variant") + variant, variant_noise_);
  std::vector<float> out(acc.begin(), acc.end());
  bank::normalize(out);
  return out;
}

std::vector<float> MockEmbedder::embed(std::string_view image_handle) {
  if (image_handle.starts_with("mock:")) {
    const auto rest = image_handle.substr(5);
    const auto colon = rest.find(':');
    std::uint64_t variant = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + (colon == std::string_view::npos ? 0 : colon), variant);
    if (colon == std::string_view::npos || ec != std::errc() || ptr != rest.data() + colon) {
      throw Error(ErrorCode::kBackend, "malformed mock image handle: " + std::string(image_handle));
    }
    return embed_prompt(rest.substr(colon + 1), variant);
  }
  const std::filesystem::path path{std::string(image_handle)};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kBackend, "mock embedder cannot read " + path.string());
  const std::string content(std::istreambuf_iterator<char>(in), {});
  return embed_prompt(content, fnv1a(path.filename().string()));
}

}  // namespace promptrecon::backends
