// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The cyclic attack: retrieve context, build an instruction, ask the LLM for
// a prompt, generate images, embed and score them, then refine or stop.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptrecon/backends.hpp"
#include "promptrecon/bank.hpp"
#include "promptrecon/classifier.hpp"
#include "promptrecon/promptgen.hpp"

namespace promptrecon::orchestrator {

using Vectors = std::vector<std::vector<float>>;

enum class Setting {
  kMidjourneyMultiple,
  kMidjourneySingle,
  kDalle3Multiple,
  kDalle3Single,
  kCrossMultiple,
  kCrossSingle,
  kNaturalSingle,
};

inline constexpr std::array<Setting, 7> kAllSettings = {
    Setting::kMidjourneyMultiple, Setting::kMidjourneySingle, Setting::kDalle3Multiple, Setting::kDalle3Single,
    Setting::kCrossMultiple,      Setting::kCrossSingle,      Setting::kNaturalSingle};

/// Report label, e.g. "Midjourney (multiple images)".
std::string_view to_string(Setting setting) noexcept;
/// Config key, e.g. "midjourney-multiple".
std::string_view slug(Setting setting) noexcept;
/// Accepts a label or a slug.
std::optional<Setting> setting_from_string(std::string_view text) noexcept;

struct StopPolicy {
  std::size_t max_refinement_rounds = 3;
  double plateau_epsilon = 0.005;
  double target_similarity = 0.95;

  /// Throws Error(kInvalidArgument) for a negative or non-finite epsilon or a
  /// non-finite target.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static StopPolicy from_json(const nlohmann::json& j);
};

enum class StopReason { kMaxRounds, kPlateau, kThreshold, kBackendError };

std::string_view to_string(StopReason reason) noexcept;
std::optional<StopReason> stop_reason_from_string(std::string_view text) noexcept;

struct RoundRecord {
  std::size_t round_index = 0;
  promptgen::InstructionText instruction;
  std::string candidate_prompt;
  std::size_t candidate_tokens = 0;
  /// True when the first candidate failed validation and was re-asked.
  bool retried = false;
  /// Set when the candidate still fails validation after the re-ask.
  std::optional<promptgen::CandidateStatus> violation;
  std::vector<std::string> generated_image_handles;
  Vectors generated_embeddings;
  double similarity = 0.0;
  std::int64_t wall_time_ms = 0;
  /// Summed over the original call and any re-ask.
  std::optional<backends::TokenUsage> token_usage;
};

struct AttackSession {
  /// Identifies the target for joining with human ratings.
  std::string sample_id;
  Setting setting = Setting::kMidjourneyMultiple;
  std::string method = "Our Attack";
  std::string t2i_backend;
  std::vector<std::string> target_images;
  Vectors target_embeddings;
  promptgen::AttackContext seeds;
  StopPolicy policy;
  std::vector<RoundRecord> rounds;
  std::size_t best_round = 0;
  std::optional<StopReason> stop_reason;
  std::string error;

  /// Similarity of the best round. Throws Error(kEmptySet) with no rounds.
  double best_similarity() const;
  /// Per-round totals; rounds without usage contribute nothing.
  backends::TokenUsage total_usage() const;
  /// The prompt of the best round, the attack's output.
  const std::string& best_prompt() const;

  nlohmann::ordered_json to_json() const;
  static AttackSession from_json(const nlohmann::json& j);
};

/// Mean cosine over all target x generated pairs.
/// Errors: kEmptySet, kDimMismatch, kZeroVector.
double score_similarity(const Vectors& targets, const Vectors& generated);

struct StopDecision {
  bool stop = false;
  std::optional<StopReason> reason;
};

/// Checks, in order: the best similarity so far reaching the target
/// (Threshold); the last round raising the best-so-far by less than epsilon
/// (Plateau, needs two rounds); the refinement budget being spent (MaxRounds).
/// `similarities` holds one entry per completed round.
StopDecision should_stop(std::span<const double> similarities, const StopPolicy& policy);
StopDecision should_stop(const AttackSession& session, const StopPolicy& policy);

struct Backends {
  backends::MultimodalLlmClient& llm;
  backends::TextToImageClient& t2i;
  backends::EmbeddingProvider& embedder;
};

struct AttackOptions {
  std::string sample_id;
  Setting setting = Setting::kMidjourneyMultiple;
  std::string method = "Our Attack";
  std::size_t images_per_round = 4;
  StopPolicy policy;
  /// Null uses TemplateSet::load_default().
  const promptgen::TemplateSet* templates = nullptr;
  /// Null uses default_tokenizer().
  const Tokenizer* tokenizer = nullptr;
  /// Milliseconds from an arbitrary origin. Null records zero wall time,
  /// which keeps serialized sessions reproducible.
  std::function<std::int64_t()> clock_ms;
};

/// Text appended to the instruction when a candidate fails validation.
std::string corrective_suffix(const promptgen::CandidateCheck& check, std::string_view rejected);

/// Runs round 0 with the initial instruction and then up to
/// policy.max_refinement_rounds refinement rounds, each showing the LLM the
/// targets and the previous round's images. A backend failure ends the
/// session with stop_reason kBackendError and the completed rounds kept.
/// Errors raised before any backend call (kEmptyModifierList, kMissingExample,
/// kInvalidArgument for no targets) propagate.
AttackSession run_attack(const std::vector<std::string>& target_images, const promptgen::AttackContext& seeds,
                         const Backends& backends, const AttackOptions& options);

struct RetrievalOptions {
  std::size_t neighbors = 10;
  std::size_t modifiers = 20;
  std::size_t keywords = 10;
  std::string example_prompt = std::string(promptgen::kDefaultExamplePrompt);
};

/// Builds the context seeds from target embeddings: the normalized mean
/// embedding queries the bank's text side, neighbor prompts give keywords and
/// named entities, and the classifier's top-k labels give the modifiers.
/// Errors: kEmptySet, kDimMismatch, kZeroVector, kEmptyBank.
promptgen::AttackContext retrieve_context(const Vectors& target_embeddings, const bank::EmbeddingBank& bank,
                                          const bank::CorpusStats& stats, const classifier::MlpModel& model,
                                          const std::vector<std::string>& labels, const RetrievalOptions& options);

}  // namespace promptrecon::orchestrator
