// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/promptgen.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>

#include "promptrecon/error.hpp"
#include "text_util.hpp"

#ifndef PROMPTRECON_TEMPLATE_DIR
#define PROMPTRECON_TEMPLATE_DIR "assets/templates"
#endif

namespace promptrecon::promptgen {

const std::string_view kDefaultExamplePrompt =
    "Dark street Tokyo environment Traditional Japanese illustration of a Funky Musician. With bird mask "
    "traditional Japanese elements and neo electro string instrument big japanese graffiti, Crisp contemporary "
    "illustrations, bold lines, vibrant, metallic, moving, geometric, expressive";

namespace {

const std::set<std::string, std::less<>>& known_slots() {
  static const std::set<std::string, std::less<>> slots = {"modifiers", "entities", "general_words", "example",
                                                           "previous_prompt"};
  return slots;
}

void dedup(std::vector<std::string>& items) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (auto& s : items) {
    if (seen.insert(s).second) out.push_back(std::move(s));
  }
  items = std::move(out);
}

std::string join_or_none(std::vector<std::string> items) {
  dedup(items);
  return items.empty() ? "none" : text::join(items, ", ");
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  return j.contains(key) ? j.at(key).get<std::vector<std::string>>() : std::vector<std::string>{};
}

}  // namespace

void AttackContext::deduplicate() {
  dedup(modifiers);
  dedup(named_entities);
  dedup(general_words);
}

nlohmann::ordered_json AttackContext::to_json() const {
  nlohmann::ordered_json j;
  j["modifiers"] = modifiers;
  j["named_entities"] = named_entities;
  j["general_words"] = general_words;
  j["example_prompt"] = example_prompt;
  j["target_images"] = target_images;
  j["history"] = nlohmann::ordered_json::array();
  for (const auto& r : history) j["history"].push_back({{"prompt", r.prompt}, {"images", r.images}});
  return j;
}

AttackContext AttackContext::from_json(const nlohmann::json& j) {
  AttackContext c;
  try {
    c.modifiers = string_list(j, "modifiers");
    c.named_entities = string_list(j, "named_entities");
    c.general_words = string_list(j, "general_words");
    c.example_prompt = j.value("example_prompt", std::string());
    c.target_images = string_list(j, "target_images");
    if (j.contains("history")) {
      for (const auto& r : j.at("history")) c.history.push_back({r.at("prompt").get<std::string>(), string_list(r, "images")});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("attack context: ") + e.what());
  }
  return c;
}

std::string_view to_string(InstructionKind kind) noexcept {
  return kind == InstructionKind::kInitial ? "initial" : "refinement";
}

Template::Template(std::string source) {
  std::size_t pos = 0;
  std::string literal;
  while (pos < source.size()) {
    const auto open = source.find("{{", pos);
    if (open == std::string::npos) {
      literal += source.substr(pos);
      break;
    }
    literal += source.substr(pos, open - pos);
    const auto close = source.find("}}", open + 2);
    if (close == std::string::npos) throw Error(ErrorCode::kTemplate, "unterminated placeholder at byte " + std::to_string(open));
    std::string name(text::trim(std::string_view(source).substr(open + 2, close - open - 2)));
    if (!known_slots().contains(name)) throw Error(ErrorCode::kTemplate, "unknown placeholder {{" + name + "}}");
    if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
    literal.clear();
    if (std::find(slots_.begin(), slots_.end(), name) == slots_.end()) slots_.push_back(name);
    pieces_.push_back({true, std::move(name)});
    pos = close + 2;
  }
  if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
}

std::string Template::render(const std::map<std::string, std::string, std::less<>>& values) const {
  std::string out;
  for (const auto& p : pieces_) {
    if (!p.slot) {
      out += p.text;
      continue;
    }
    auto it = values.find(p.text);
    if (it == values.end()) throw Error(ErrorCode::kTemplate, "no value for {{" + p.text + "}}");
    out += it->second;
  }
  return out;
}

namespace {

Template read_template(const std::filesystem::path& path, std::initializer_list<std::string_view> required) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open template " + path.string());
  Template t(std::string(std::istreambuf_iterator<char>(in), {}));
  for (auto slot : required) {
    if (std::find(t.slots().begin(), t.slots().end(), slot) == t.slots().end()) {
      throw Error(ErrorCode::kTemplate, path.string() + " lacks the {{" + std::string(slot) + "}} slot");
    }
  }
  return t;
}

}  // namespace

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  return {read_template(dir / "initial.txt", {"modifiers", "entities", "general_words", "example"}),
          read_template(dir / "refinement.txt",
                        {"modifiers", "entities", "general_words", "example", "previous_prompt"})};
}

std::filesystem::path TemplateSet::default_dir() { return PROMPTRECON_TEMPLATE_DIR; }

TemplateSet TemplateSet::load_default() { return load(default_dir()); }

namespace {

std::map<std::string, std::string, std::less<>> slot_values(const AttackContext& c) {
  if (c.modifiers.empty()) throw Error(ErrorCode::kEmptyModifierList, "the context has no modifiers");
  if (text::trim(c.example_prompt).empty()) throw Error(ErrorCode::kMissingExample, "the context has no example prompt");
  return {{"modifiers", join_or_none(c.modifiers)},
          {"entities", join_or_none(c.named_entities)},
          {"general_words", join_or_none(c.general_words)},
          {"example", c.example_prompt}};
}

}  // namespace

InstructionText build_initial_instruction(const AttackContext& context, const TemplateSet& templates,
                                          const Tokenizer& tokenizer) {
  InstructionText out{InstructionKind::kInitial, templates.initial.render(slot_values(context)), 0};
  out.token_estimate = tokenizer.count(out.text);
  return out;
}

InstructionText build_refinement_instruction(const AttackContext& context, const TemplateSet& templates,
                                             const Tokenizer& tokenizer) {
  if (context.history.empty()) throw Error(ErrorCode::kEmptyHistory, "refinement needs a previous round");
  auto values = slot_values(context);
  values["previous_prompt"] = context.history.back().prompt;
  InstructionText out{InstructionKind::kRefinement, templates.refinement.render(values), 0};
  out.token_estimate = tokenizer.count(out.text);
  return out;
}

std::string_view to_string(CandidateStatus status) noexcept {
  switch (status) {
    case CandidateStatus::kOk: return "Ok";
    case CandidateStatus::kTooShort: return "TooShort";
    case CandidateStatus::kTooLong: return "TooLong";
    case CandidateStatus::kTooLongHard: return "TooLongHard";
  }
  return "Unknown";
}

CandidateCheck validate_candidate(std::string_view prompt, const Tokenizer& tokenizer, std::size_t min_tokens,
                                  std::size_t max_tokens) {
  CandidateCheck c;
  c.tokens = tokenizer.count(prompt);
  if (c.tokens > kHardTokenCeiling) {
    c.status = CandidateStatus::kTooLongHard;
  } else if (c.tokens < min_tokens) {
    c.status = CandidateStatus::kTooShort;
  } else if (c.tokens > max_tokens) {
    c.status = CandidateStatus::kTooLong;
  }
  return c;
}

}  // namespace promptrecon::promptgen
