// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Per-sample attack cost from declared prices and token accounting. Money is
// held as an integer count of micro-dollars so reported totals are exact sums
// of their components.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "promptrecon/orchestrator.hpp"

namespace promptrecon::cost {

class Money {
 public:
  constexpr Money() = default;
  static constexpr Money from_micros(std::int64_t micros) { return Money(micros); }
  /// Parses a plain decimal such as "0.03", "10" or "2.5e-1". More than six
  /// fractional digits round half away from zero. Throws Error(kParse).
  static Money parse(std::string_view decimal);
  /// Accepts a JSON number or decimal string. Numbers go through their
  /// shortest round-trip text, so 0.03 parses as exactly 30000 micros.
  static Money from_json(const nlohmann::json& j);

  constexpr std::int64_t micros() const noexcept { return micros_; }
  double to_double() const noexcept { return static_cast<double>(micros_) / 1e6; }
  /// Six fractional digits, e.g. "0.239670".
  std::string to_string() const;
  /// Rounded half away from zero to `places` (0..6) digits.
  std::string to_string(int places) const;

  friend constexpr Money operator+(Money a, Money b) noexcept { return Money(a.micros_ + b.micros_); }
  friend constexpr Money operator-(Money a, Money b) noexcept { return Money(a.micros_ - b.micros_); }
  friend constexpr Money operator*(Money a, std::int64_t n) noexcept { return Money(a.micros_ * n); }
  friend constexpr auto operator<=>(Money, Money) noexcept = default;

 private:
  constexpr explicit Money(std::int64_t micros) : micros_(micros) {}
  std::int64_t micros_ = 0;
};

/// tokens * price_per_million / 1e6, rounded half up to a whole micro-dollar.
Money token_cost(std::uint64_t tokens, Money price_per_mtok);

struct CostModel {
  Money llm_input_per_mtok;
  Money llm_output_per_mtok;
  Money image_fee_total;
  std::map<std::string, Money, std::less<>> t2i_per_generation;
  std::uint64_t initial_input_tokens = 900;
  std::uint64_t refinement_input_tokens = 1165;
  std::uint64_t output_tokens_per_round = 381;

  /// Schema: {llm: {input_per_mtok, output_per_mtok, image_fee_total},
  /// t2i: {<backend>: price, ...}, tokens: {initial_input, refinement_input,
  /// output_per_round}}. Missing token fields keep their defaults.
  /// Errors: kParse, kInvalidArgument for a negative price.
  static CostModel from_json(const nlohmann::json& j);
  static CostModel load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

struct CostBreakdown {
  std::string backend;
  std::uint64_t rounds = 0;
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
  Money llm_input_cost;
  Money llm_output_cost;
  Money llm_text_cost;
  Money image_fee;
  Money generation_cost;
  Money total;

  friend bool operator==(const CostBreakdown&, const CostBreakdown&) = default;

  nlohmann::ordered_json to_json() const;
  /// Aligned "label  value" lines.
  std::string render_text() const;
};

/// Round 1 is the initial prompt; every further round is a refinement.
/// Errors: kInvalidArgument for rounds_total < 1, kUnknownBackend.
CostBreakdown estimate_cost(const CostModel& model, std::uint64_t rounds_total, std::string_view backend);

/// Same arithmetic with the session's recorded token sums and one generation
/// per recorded round. Errors: kMissingUsage (no rounds or a round without
/// usage), kUnknownBackend.
CostBreakdown cost_from_session(const CostModel& model, const orchestrator::AttackSession& session);

}  // namespace promptrecon::cost
