// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/orchestrator.hpp"

#include <algorithm>
#include <cmath>

#include "promptrecon/error.hpp"

namespace promptrecon::orchestrator {

namespace {

struct SettingName {
  Setting setting;
  std::string_view label;
  std::string_view slug;
};

constexpr std::array<SettingName, 7> kSettingNames = {{
    {Setting::kMidjourneyMultiple, "Midjourney (multiple images)", "midjourney-multiple"},
    {Setting::kMidjourneySingle, "Midjourney (single image)", "midjourney-single"},
    {Setting::kDalle3Multiple, "DALL-E 3 (multiple images)", "dalle3-multiple"},
    {Setting::kDalle3Single, "DALL-E 3 (single image)", "dalle3-single"},
    {Setting::kCrossMultiple, "Cross-setting (multiple images)", "cross-multiple"},
    {Setting::kCrossSingle, "Cross-setting (single image)", "cross-single"},
    {Setting::kNaturalSingle, "Natural images (single image)", "natural-single"},
}};

constexpr std::array<std::pair<StopReason, std::string_view>, 4> kStopNames = {{
    {StopReason::kMaxRounds, "MaxRounds"},
    {StopReason::kPlateau, "Plateau"},
    {StopReason::kThreshold, "Threshold"},
    {StopReason::kBackendError, "BackendError"},
}};

std::optional<promptgen::CandidateStatus> candidate_status_from_string(std::string_view s) {
  for (auto st : {promptgen::CandidateStatus::kOk, promptgen::CandidateStatus::kTooShort,
                  promptgen::CandidateStatus::kTooLong, promptgen::CandidateStatus::kTooLongHard}) {
    if (promptgen::to_string(st) == s) return st;
  }
  return std::nullopt;
}

nlohmann::ordered_json usage_json(const backends::TokenUsage& u) {
  return {{"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}};
}

}  // namespace

std::string_view to_string(Setting setting) noexcept {
  for (const auto& n : kSettingNames) {
    if (n.setting == setting) return n.label;
  }
  return "unknown";
}

std::string_view slug(Setting setting) noexcept {
  for (const auto& n : kSettingNames) {
    if (n.setting == setting) return n.slug;
  }
  return "unknown";
}

std::optional<Setting> setting_from_string(std::string_view text) noexcept {
  for (const auto& n : kSettingNames) {
    if (n.label == text || n.slug == text) return n.setting;
  }
  return std::nullopt;
}

std::string_view to_string(StopReason reason) noexcept {
  for (const auto& [r, name] : kStopNames) {
    if (r == reason) return name;
  }
  return "unknown";
}

std::optional<StopReason> stop_reason_from_string(std::string_view text) noexcept {
  for (const auto& [r, name] : kStopNames) {
    if (name == text) return r;
  }
  return std::nullopt;
}

void StopPolicy::validate() const {
  if (!std::isfinite(plateau_epsilon) || plateau_epsilon < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "plateau_epsilon must be finite and >= 0");
  }
  if (!std::isfinite(target_similarity)) throw Error(ErrorCode::kInvalidArgument, "target_similarity must be finite");
}

nlohmann::ordered_json StopPolicy::to_json() const {
  return {{"max_refinement_rounds", max_refinement_rounds},
          {"plateau_epsilon", plateau_epsilon},
          {"target_similarity", target_similarity}};
}

StopPolicy StopPolicy::from_json(const nlohmann::json& j) {
  StopPolicy p;
  try {
    if (j.contains("max_refinement_rounds") && j.at("max_refinement_rounds").get<std::int64_t>() < 0) {
      throw Error(ErrorCode::kInvalidArgument, "max_refinement_rounds must be >= 0");
    }
    p.max_refinement_rounds = j.value("max_refinement_rounds", p.max_refinement_rounds);
    p.plateau_epsilon = j.value("plateau_epsilon", p.plateau_epsilon);
    p.target_similarity = j.value("target_similarity", p.target_similarity);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("stop policy: ") + e.what());
  }
  p.validate();
  return p;
}

double AttackSession::best_similarity() const {
  if (rounds.empty()) throw Error(ErrorCode::kEmptySet, "session has no rounds");
  return rounds.at(best_round).similarity;
}

const std::string& AttackSession::best_prompt() const {
  if (rounds.empty()) throw Error(ErrorCode::kEmptySet, "session has no rounds");
  return rounds.at(best_round).candidate_prompt;
}

backends::TokenUsage AttackSession::total_usage() const {
  backends::TokenUsage total;
  for (const auto& r : rounds) {
    if (r.token_usage) {
      total.input_tokens += r.token_usage->input_tokens;
      total.output_tokens += r.token_usage->output_tokens;
    }
  }
  return total;
}

nlohmann::ordered_json AttackSession::to_json() const {
  nlohmann::ordered_json j;
  j["sample_id"] = sample_id;
  j["setting"] = to_string(setting);
  j["method"] = method;
  j["t2i_backend"] = t2i_backend;
  j["policy"] = policy.to_json();
  j["target_images"] = target_images;
  j["target_embeddings"] = target_embeddings;
  j["seeds"] = seeds.to_json();
  j["rounds"] = nlohmann::ordered_json::array();
  for (const auto& r : rounds) {
    nlohmann::ordered_json o;
    o["round_index"] = r.round_index;
    o["instruction"] = {{"kind", promptgen::to_string(r.instruction.kind)},
                        {"text", r.instruction.text},
                        {"token_estimate", r.instruction.token_estimate}};
    o["candidate_prompt"] = r.candidate_prompt;
    o["candidate_tokens"] = r.candidate_tokens;
    o["retried"] = r.retried;
    o["violation"] = r.violation ? nlohmann::ordered_json(promptgen::to_string(*r.violation)) : nlohmann::ordered_json(nullptr);
    o["generated_image_handles"] = r.generated_image_handles;
    o["generated_embeddings"] = r.generated_embeddings;
    o["similarity"] = r.similarity;
    o["wall_time_ms"] = r.wall_time_ms;
    o["token_usage"] = r.token_usage ? usage_json(*r.token_usage) : nlohmann::ordered_json(nullptr);
    j["rounds"].push_back(std::move(o));
  }
  j["best_round"] = best_round;
  j["best_similarity"] = rounds.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(best_similarity());
  j["best_prompt"] = rounds.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(best_prompt());
  j["stop_reason"] = stop_reason ? nlohmann::ordered_json(to_string(*stop_reason)) : nlohmann::ordered_json(nullptr);
  j["error"] = error;
  j["total_usage"] = usage_json(total_usage());
  return j;
}

AttackSession AttackSession::from_json(const nlohmann::json& j) {
  AttackSession s;
  try {
    const auto setting_text = j.at("setting").get<std::string>();
    const auto setting = setting_from_string(setting_text);
    if (!setting) throw Error(ErrorCode::kParse, "unknown setting '" + setting_text + "'");
    s.setting = *setting;
    s.sample_id = j.value("sample_id", std::string());
    s.method = j.at("method").get<std::string>();
    s.t2i_backend = j.value("t2i_backend", std::string());
    if (j.contains("policy")) s.policy = StopPolicy::from_json(j.at("policy"));
    s.target_images = j.value("target_images", std::vector<std::string>{});
    s.target_embeddings = j.value("target_embeddings", Vectors{});
    if (j.contains("seeds")) s.seeds = promptgen::AttackContext::from_json(j.at("seeds"));
    for (const auto& o : j.at("rounds")) {
      RoundRecord r;
      r.round_index = o.at("round_index").get<std::size_t>();
      const auto& ins = o.at("instruction");
      r.instruction.kind = ins.at("kind").get<std::string>() == "initial" ? promptgen::InstructionKind::kInitial
                                                                          : promptgen::InstructionKind::kRefinement;
      r.instruction.text = ins.at("text").get<std::string>();
      r.instruction.token_estimate = ins.value("token_estimate", std::size_t{0});
      r.candidate_prompt = o.at("candidate_prompt").get<std::string>();
      r.candidate_tokens = o.value("candidate_tokens", std::size_t{0});
      r.retried = o.value("retried", false);
      if (o.contains("violation") && !o.at("violation").is_null()) {
        r.violation = candidate_status_from_string(o.at("violation").get<std::string>());
        if (!r.violation) throw Error(ErrorCode::kParse, "unknown violation status");
      }
      r.generated_image_handles = o.value("generated_image_handles", std::vector<std::string>{});
      r.generated_embeddings = o.value("generated_embeddings", Vectors{});
      r.similarity = o.at("similarity").get<double>();
      r.wall_time_ms = o.value("wall_time_ms", std::int64_t{0});
      if (o.contains("token_usage") && !o.at("token_usage").is_null()) {
        const auto& u = o.at("token_usage");
        r.token_usage = backends::TokenUsage{u.at("input_tokens").get<std::uint64_t>(),
                                             u.at("output_tokens").get<std::uint64_t>()};
      }
      s.rounds.push_back(std::move(r));
    }
    s.best_round = j.value("best_round", std::size_t{0});
    if (!s.rounds.empty() && s.best_round >= s.rounds.size()) throw Error(ErrorCode::kParse, "best_round out of range");
    if (j.contains("stop_reason") && !j.at("stop_reason").is_null()) {
      s.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
      if (!s.stop_reason) throw Error(ErrorCode::kParse, "unknown stop_reason");
    }
    s.error = j.value("error", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("attack session: ") + e.what());
  }
  return s;
}

double score_similarity(const Vectors& targets, const Vectors& generated) {
  if (targets.empty() || generated.empty()) throw Error(ErrorCode::kEmptySet, "similarity needs two non-empty sets");
  double sum = 0.0;
  for (const auto& t : targets) {
    for (const auto& g : generated) sum += bank::cosine(t, g);
  }
  return sum / static_cast<double>(targets.size() * generated.size());
}

StopDecision should_stop(std::span<const double> similarities, const StopPolicy& policy) {
  if (similarities.empty()) return {};
  const double best = *std::max_element(similarities.begin(), similarities.end());
  if (best >= policy.target_similarity) return {true, StopReason::kThreshold};
  if (similarities.size() >= 2) {
    const double previous_best = *std::max_element(similarities.begin(), similarities.end() - 1);
    if (best - previous_best < policy.plateau_epsilon) return {true, StopReason::kPlateau};
  }
  if (similarities.size() >= 1 + policy.max_refinement_rounds) return {true, StopReason::kMaxRounds};
  return {};
}

StopDecision should_stop(const AttackSession& session, const StopPolicy& policy) {
  std::vector<double> sims;
  for (const auto& r : session.rounds) sims.push_back(r.similarity);
  return should_stop(sims, policy);
}

std::string corrective_suffix(const promptgen::CandidateCheck& check, std::string_view rejected) {
  return "\n\n" + std::string(backends::kCorrectiveMarker) + " your previous answer \"" + std::string(rejected) +
         "\" has " + std::to_string(check.tokens) + " tokens (" + std::string(promptgen::to_string(check.status)) +
         "). Reply with one prompt of " + std::to_string(promptgen::kMinCandidateTokens) + " to " +
         std::to_string(promptgen::kMaxCandidateTokens) + " tokens.\n";
}

AttackSession run_attack(const std::vector<std::string>& target_images, const promptgen::AttackContext& seeds,
                         const Backends& backends, const AttackOptions& options) {
  options.policy.validate();
  if (target_images.empty()) throw Error(ErrorCode::kInvalidArgument, "no target images");
  if (options.images_per_round == 0) throw Error(ErrorCode::kInvalidArgument, "images_per_round must be positive");

  std::optional<promptgen::TemplateSet> loaded;
  if (options.templates == nullptr) loaded = promptgen::TemplateSet::load_default();
  const auto& templates = options.templates != nullptr ? *options.templates : *loaded;
  const auto tokenizer_holder = default_tokenizer();
  const Tokenizer& tokenizer = options.tokenizer != nullptr ? *options.tokenizer : *tokenizer_holder;
  auto now = [&]() -> std::int64_t { return options.clock_ms ? options.clock_ms() : 0; };

  AttackSession session;
  session.sample_id = options.sample_id;
  session.setting = options.setting;
  session.method = options.method;
  session.t2i_backend = std::string(backends.t2i.backend_name());
  session.policy = options.policy;
  session.target_images = target_images;
  session.seeds = seeds;
  session.seeds.deduplicate();
  session.seeds.history.clear();
  session.seeds.target_images = target_images;
  promptgen::build_initial_instruction(session.seeds, templates, tokenizer);

  std::size_t round_index = 0;
  try {
    for (const auto& t : target_images) session.target_embeddings.push_back(backends.embedder.embed(t));

    auto context = session.seeds;
    while (true) {
      RoundRecord r;
      r.round_index = round_index;
      const auto start = now();
      r.instruction = round_index == 0 ? promptgen::build_initial_instruction(context, templates, tokenizer)
                                       : promptgen::build_refinement_instruction(context, templates, tokenizer);
      std::vector<std::string> shown = target_images;
      if (!context.history.empty()) {
        const auto& prev = context.history.back().images;
        shown.insert(shown.end(), prev.begin(), prev.end());
      }

      auto reply = backends.llm.generate(r.instruction.text, shown);
      auto usage = reply.usage;
      auto check = promptgen::validate_candidate(reply.prompt, tokenizer);
      if (!check.ok()) {
        r.retried = true;
        reply = backends.llm.generate(r.instruction.text + corrective_suffix(check, reply.prompt), shown);
        usage.input_tokens += reply.usage.input_tokens;
        usage.output_tokens += reply.usage.output_tokens;
        check = promptgen::validate_candidate(reply.prompt, tokenizer);
        if (!check.ok()) r.violation = check.status;
      }
      r.candidate_prompt = reply.prompt;
      r.candidate_tokens = check.tokens;
      r.token_usage = usage;

      r.generated_image_handles = backends.t2i.generate(r.candidate_prompt, options.images_per_round);
      for (const auto& h : r.generated_image_handles) r.generated_embeddings.push_back(backends.embedder.embed(h));
      r.similarity = score_similarity(session.target_embeddings, r.generated_embeddings);
      r.wall_time_ms = now() - start;

      context.history.push_back({r.candidate_prompt, r.generated_image_handles});
      session.rounds.push_back(std::move(r));
      if (session.rounds.back().similarity > session.rounds[session.best_round].similarity) {
        session.best_round = session.rounds.size() - 1;
      }
      const auto decision = should_stop(session, session.policy);
      if (decision.stop) {
        session.stop_reason = decision.reason;
        break;
      }
      ++round_index;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kBackend) throw;
    session.stop_reason = StopReason::kBackendError;
    session.error = "round " + std::to_string(round_index) + ": " + e.what();
  }
  return session;
}

promptgen::AttackContext retrieve_context(const Vectors& target_embeddings, const bank::EmbeddingBank& bank,
                                          const bank::CorpusStats& stats, const classifier::MlpModel& model,
                                          const std::vector<std::string>& labels, const RetrievalOptions& options) {
  if (target_embeddings.empty()) throw Error(ErrorCode::kEmptySet, "no target embeddings");
  if (bank.empty()) throw Error(ErrorCode::kEmptyBank, "cannot retrieve from an empty bank");
  if (labels.size() != model.output_dim()) {
    throw Error(ErrorCode::kDimMismatch, "model has " + std::to_string(model.output_dim()) + " outputs but " +
                                             std::to_string(labels.size()) + " labels");
  }
  const std::size_t dim = target_embeddings.front().size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& t : target_embeddings) {
    if (t.size() != dim) throw Error(ErrorCode::kDimMismatch, "target embeddings differ in dimension");
    for (std::size_t i = 0; i < dim; ++i) mean[i] += t[i];
  }
  std::vector<float> query(mean.begin(), mean.end());
  bank::normalize(query);

  promptgen::AttackContext c;
  const auto neighbors = bank::knn(bank, query, std::min(std::max<std::size_t>(options.neighbors, 1), bank.count()),
                                   bank::Side::kText);
  const auto report = bank::extract_keywords_and_entities(neighbors, stats, options.keywords);
  for (const auto& [term, score] : report.keywords) c.general_words.push_back(term);
  c.named_entities = report.named_entities;
  const auto k = std::min(std::max<std::size_t>(options.modifiers, 1), labels.size());
  for (const auto& s : classifier::predict_topk(model, query, k)) c.modifiers.push_back(labels[s.label]);
  c.example_prompt = options.example_prompt;
  return c;
}

}  // namespace promptrecon::orchestrator
