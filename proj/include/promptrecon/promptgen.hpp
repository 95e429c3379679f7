// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Instruction assembly for the multimodal LLM and candidate-prompt checks.
//
// Instruction wording lives in external UTF-8 template files with
// {{modifiers}}, {{entities}}, {{general_words}}, {{example}} and
// {{previous_prompt}} placeholders. Lists render joined by ", " and an empty
// list renders as "none".

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptrecon/tokenizer.hpp"

namespace promptrecon::promptgen {

/// The fixed exemplar used when no other example prompt is configured.
extern const std::string_view kDefaultExamplePrompt;

inline constexpr std::size_t kMinCandidateTokens = 15;
inline constexpr std::size_t kMaxCandidateTokens = 50;
inline constexpr std::size_t kHardTokenCeiling = 77;

struct Round {
  std::string prompt;
  std::vector<std::string> images;  // image handles generated from `prompt`
};

struct AttackContext {
  std::vector<std::string> modifiers;
  std::vector<std::string> named_entities;
  std::vector<std::string> general_words;
  std::string example_prompt;
  std::vector<std::string> target_images;
  std::vector<Round> history;

  /// Drops repeated list entries, keeping first occurrences.
  void deduplicate();

  nlohmann::ordered_json to_json() const;
  static AttackContext from_json(const nlohmann::json& j);
};

enum class InstructionKind { kInitial, kRefinement };

std::string_view to_string(InstructionKind kind) noexcept;

struct InstructionText {
  InstructionKind kind = InstructionKind::kInitial;
  std::string text;
  std::size_t token_estimate = 0;
};

/// A parsed template. Throws Error(kTemplate) on an unterminated or unknown
/// placeholder.
class Template {
 public:
  explicit Template(std::string source);

  /// Single pass: values are inserted literally and never re-expanded.
  /// Throws Error(kTemplate) when a used slot has no value.
  std::string render(const std::map<std::string, std::string, std::less<>>& values) const;

  const std::vector<std::string>& slots() const noexcept { return slots_; }

 private:
  struct Piece {
    bool slot;
    std::string text;
  };
  std::vector<Piece> pieces_;
  std::vector<std::string> slots_;
};

struct TemplateSet {
  Template initial;
  Template refinement;

  /// Reads initial.txt and refinement.txt. The initial template must use the
  /// modifiers, entities, general_words and example slots; the refinement
  /// template those plus previous_prompt. Errors: kIo, kTemplate.
  static TemplateSet load(const std::filesystem::path& dir);
  /// The directory compiled in at build time.
  static TemplateSet load_default();
  static std::filesystem::path default_dir();
};

/// Errors: kEmptyModifierList, kMissingExample.
InstructionText build_initial_instruction(const AttackContext& context, const TemplateSet& templates,
                                          const Tokenizer& tokenizer = *default_tokenizer());

/// Embeds the most recent round's prompt. Errors: kEmptyHistory plus those of
/// the initial builder.
InstructionText build_refinement_instruction(const AttackContext& context, const TemplateSet& templates,
                                             const Tokenizer& tokenizer = *default_tokenizer());

enum class CandidateStatus { kOk, kTooShort, kTooLong, kTooLongHard };

std::string_view to_string(CandidateStatus status) noexcept;

struct CandidateCheck {
  CandidateStatus status = CandidateStatus::kOk;
  std::size_t tokens = 0;

  bool ok() const noexcept { return status == CandidateStatus::kOk; }
};

/// A prompt over the 77-token ceiling is kTooLongHard whatever `max_tokens`
/// says; otherwise it is checked against [min_tokens, max_tokens].
CandidateCheck validate_candidate(std::string_view prompt, const Tokenizer& tokenizer,
                                  std::size_t min_tokens = kMinCandidateTokens,
                                  std::size_t max_tokens = kMaxCandidateTokens);

}  // namespace promptrecon::promptgen
