// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/cost.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "promptrecon/error.hpp"

namespace promptrecon::cost {

namespace {

__extension__ typedef __int128 Int128;

// Divides and rounds half away from zero.
Int128 div_round(Int128 num, Int128 den) {
  const Int128 q = num / den;
  const Int128 r = num % den;
  if (2 * (r < 0 ? -r : r) >= den) return q + (num < 0 ? -1 : 1);
  return q;
}

}  // namespace

Money Money::parse(std::string_view text) {
  const std::string original(text);
  auto fail = [&]() -> Error { return Error(ErrorCode::kParse, "not a decimal amount: '" + original + "'"); };
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  std::string digits;
  int scale = 0;  // value = digits * 10^-scale
  bool seen_point = false;
  std::size_t i = 0;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      if (seen_point) ++scale;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (digits.empty()) throw fail();
  if (i < text.size()) {
    if (text[i] != 'e' && text[i] != 'E') throw fail();
    std::string_view exp = text.substr(i + 1);
    bool exp_negative = false;
    if (!exp.empty() && (exp.front() == '-' || exp.front() == '+')) {
      exp_negative = exp.front() == '-';
      exp.remove_prefix(1);
    }
    if (exp.empty() || exp.size() > 3) throw fail();
    int e = 0;
    for (char c : exp) {
      if (!std::isdigit(static_cast<unsigned char>(c))) throw fail();
      e = e * 10 + (c - '0');
    }
    scale += exp_negative ? e : -e;
  }
  // Drop leading zeros before the size check.
  const auto first = digits.find_first_not_of('0');
  digits = first == std::string::npos ? "0" : digits.substr(first);
  if (static_cast<int>(digits.size()) - scale > 12) throw Error(ErrorCode::kParse, "amount too large: '" + original + "'");

  Int128 value = 0;
  for (char c : digits) value = value * 10 + (c - '0');
  int shift = 6 - scale;  // micros = value * 10^shift
  if (shift >= 0) {
    for (int k = 0; k < shift; ++k) value *= 10;
  } else if (-shift > 36) {
    value = 0;
  } else {
    Int128 den = 1;
    for (int k = 0; k < -shift; ++k) den *= 10;
    value = div_round(value, den);
  }
  const auto micros = static_cast<std::int64_t>(value);
  return Money(negative ? -micros : micros);
}

Money Money::from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse(j.get<std::string>());
  if (j.is_number()) return parse(j.dump());
  throw Error(ErrorCode::kParse, "expected a price, got " + j.dump());
}

std::string Money::to_string() const { return to_string(6); }

std::string Money::to_string(int places) const {
  if (places < 0 || places > 6) throw Error(ErrorCode::kInvalidArgument, "places must be in [0, 6]");
  Int128 den = 1;
  for (int k = 0; k < 6 - places; ++k) den *= 10;
  const auto scaled = static_cast<std::int64_t>(div_round(micros_, den));
  std::int64_t unit = 1;
  for (int k = 0; k < places; ++k) unit *= 10;
  const std::int64_t mag = scaled < 0 ? -scaled : scaled;
  std::ostringstream out;
  if (scaled < 0) out << '-';
  out << mag / unit;
  if (places > 0) out << '.' << std::setw(places) << std::setfill('0') << mag % unit;
  return out.str();
}

Money token_cost(std::uint64_t tokens, Money price_per_mtok) {
  const Int128 num = static_cast<Int128>(tokens) * price_per_mtok.micros();
  return Money::from_micros(static_cast<std::int64_t>(div_round(num, 1'000'000)));
}

CostModel CostModel::from_json(const nlohmann::json& j) {
  CostModel m;
  try {
    const auto& llm = j.at("llm");
    m.llm_input_per_mtok = Money::from_json(llm.at("input_per_mtok"));
    m.llm_output_per_mtok = Money::from_json(llm.at("output_per_mtok"));
    m.image_fee_total = Money::from_json(llm.at("image_fee_total"));
    for (const auto& [name, price] : j.at("t2i").items()) m.t2i_per_generation[name] = Money::from_json(price);
    if (j.contains("tokens")) {
      const auto& t = j.at("tokens");
      m.initial_input_tokens = t.value("initial_input", m.initial_input_tokens);
      m.refinement_input_tokens = t.value("refinement_input", m.refinement_input_tokens);
      m.output_tokens_per_round = t.value("output_per_round", m.output_tokens_per_round);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("pricing: ") + e.what());
  }
  auto check = [](Money p, const std::string& what) {
    if (p < Money()) throw Error(ErrorCode::kInvalidArgument, "negative price for " + what);
  };
  check(m.llm_input_per_mtok, "llm.input_per_mtok");
  check(m.llm_output_per_mtok, "llm.output_per_mtok");
  check(m.image_fee_total, "llm.image_fee_total");
  for (const auto& [name, price] : m.t2i_per_generation) check(price, "t2i." + name);
  return m;
}

CostModel CostModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open pricing file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json CostModel::to_json() const {
  nlohmann::ordered_json t2i = nlohmann::ordered_json::object();
  for (const auto& [name, price] : t2i_per_generation) t2i[name] = price.to_string();
  return {{"llm",
           {{"input_per_mtok", llm_input_per_mtok.to_string()},
            {"output_per_mtok", llm_output_per_mtok.to_string()},
            {"image_fee_total", image_fee_total.to_string()}}},
          {"t2i", t2i},
          {"tokens",
           {{"initial_input", initial_input_tokens},
            {"refinement_input", refinement_input_tokens},
            {"output_per_round", output_tokens_per_round}}}};
}

nlohmann::ordered_json CostBreakdown::to_json() const {
  return {{"backend", backend},
          {"rounds", rounds},
          {"input_tokens", input_tokens},
          {"output_tokens", output_tokens},
          {"llm_input_cost", llm_input_cost.to_string()},
          {"llm_output_cost", llm_output_cost.to_string()},
          {"llm_text_cost", llm_text_cost.to_string()},
          {"image_fee", image_fee.to_string()},
          {"generation_cost", generation_cost.to_string()},
          {"total", total.to_string()}};
}

std::string CostBreakdown::render_text() const {
  std::ostringstream out;
  auto line = [&](std::string_view label, const std::string& value) {
    out << std::left << std::setw(18) << label << value << '\n';
  };
  line("backend", backend);
  line("rounds", std::to_string(rounds));
  line("input tokens", std::to_string(input_tokens));
  line("output tokens", std::to_string(output_tokens));
  line("llm text cost", "$" + llm_text_cost.to_string());
  line("image fee", "$" + image_fee.to_string());
  line("generation cost", "$" + generation_cost.to_string());
  line("total", "$" + total.to_string());
  return out.str();
}

namespace {

CostBreakdown price(const CostModel& model, std::string_view backend, std::uint64_t rounds, std::uint64_t input,
                    std::uint64_t output) {
  const auto it = model.t2i_per_generation.find(backend);
  if (it == model.t2i_per_generation.end()) {
    throw Error(ErrorCode::kUnknownBackend, "no generation price for backend '" + std::string(backend) + "'");
  }
  if (rounds > static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max())) {
    throw Error(ErrorCode::kInvalidArgument, "round count too large");
  }
  CostBreakdown b;
  b.backend = std::string(backend);
  b.rounds = rounds;
  b.input_tokens = input;
  b.output_tokens = output;
  b.llm_input_cost = token_cost(input, model.llm_input_per_mtok);
  b.llm_output_cost = token_cost(output, model.llm_output_per_mtok);
  b.llm_text_cost = b.llm_input_cost + b.llm_output_cost;
  b.image_fee = model.image_fee_total;
  b.generation_cost = it->second * static_cast<std::int64_t>(rounds);
  b.total = b.llm_text_cost + b.image_fee + b.generation_cost;
  return b;
}

}  // namespace

CostBreakdown estimate_cost(const CostModel& model, std::uint64_t rounds_total, std::string_view backend) {
  if (rounds_total < 1) throw Error(ErrorCode::kInvalidArgument, "rounds_total must be at least 1");
  const auto input = model.initial_input_tokens + (rounds_total - 1) * model.refinement_input_tokens;
  const auto output = rounds_total * model.output_tokens_per_round;
  return price(model, backend, rounds_total, input, output);
}

CostBreakdown cost_from_session(const CostModel& model, const orchestrator::AttackSession& session) {
  if (session.rounds.empty()) throw Error(ErrorCode::kMissingUsage, "session has no rounds");
  for (const auto& r : session.rounds) {
    if (!r.token_usage) {
      throw Error(ErrorCode::kMissingUsage, "round " + std::to_string(r.round_index) + " has no token usage");
    }
  }
  const auto usage = session.total_usage();
  return price(model, session.t2i_backend, session.rounds.size(), usage.input_tokens, usage.output_tokens);
}

}  // namespace promptrecon::cost
