// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/promptgen.hpp"

#include <fstream>
#include <iterator>
#include <random>

#include <gtest/gtest.h>

#include "promptrecon/error.hpp"

namespace promptrecon::promptgen {
namespace {

const std::filesystem::path kGolden = std::filesystem::path(PROMPTRECON_TEST_DATA_DIR) / "golden";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::kInvalidArgument;
}

std::size_t occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

AttackContext fixture_context() {
  AttackContext c;
  c.modifiers = {"8k", "cinematic lighting", "octane render"};
  c.named_entities = {"Awkwafina", "Hokusai"};
  c.general_words = {"lantern", "harbor", "mist"};
  c.example_prompt = "a paper lantern floating over a misty harbor at dawn, ukiyo-e, soft light";
  return c;
}

TEST(InstructionTest, InitialGoldenFile) {
  const auto t = TemplateSet::load_default();
  const auto ins = build_initial_instruction(fixture_context(), t);
  EXPECT_EQ(ins.kind, InstructionKind::kInitial);
  EXPECT_EQ(ins.text, read_file(kGolden / "initial_instruction.txt"));
  EXPECT_GT(ins.token_estimate, 200u);
}

TEST(InstructionTest, RefinementGoldenFile) {
  const auto t = TemplateSet::load_default();
  auto c = fixture_context();
  c.history.push_back({"an older prompt that must not appear", {"mock:a"}});
  c.history.push_back({"lanterns drifting above a foggy harbor, woodblock print, 8k, cinematic lighting", {"mock:b"}});
  const auto ins = build_refinement_instruction(c, t);
  EXPECT_EQ(ins.kind, InstructionKind::kRefinement);
  EXPECT_EQ(ins.text, read_file(kGolden / "refinement_instruction.txt"));
  EXPECT_EQ(ins.text.find("an older prompt"), std::string::npos);
}

TEST(InstructionTest, ModifierSlotSubstitution) {
  auto c = fixture_context();
  c.modifiers = {"8k", "cinematic"};
  const auto ins = build_initial_instruction(c, TemplateSet::load_default());
  EXPECT_NE(ins.text.find("essence of the images: 8k, cinematic\n"), std::string::npos);
}

TEST(InstructionTest, EmptyListsRenderAsNone) {
  auto c = fixture_context();
  c.named_entities.clear();
  c.general_words.clear();
  const auto text = build_initial_instruction(c, TemplateSet::load_default()).text;
  EXPECT_NE(text.find("identified in the image: none\n"), std::string::npos);
  EXPECT_NE(text.find("descriptiveness: none\n"), std::string::npos);
}

TEST(InstructionTest, Errors) {
  const auto t = TemplateSet::load_default();
  auto c = fixture_context();
  EXPECT_EQ(code_of([&] { build_refinement_instruction(c, t); }), ErrorCode::kEmptyHistory);
  c.modifiers.clear();
  EXPECT_EQ(code_of([&] { build_initial_instruction(c, t); }), ErrorCode::kEmptyModifierList);
  c = fixture_context();
  c.example_prompt = "  ";
  EXPECT_EQ(code_of([&] { build_initial_instruction(c, t); }), ErrorCode::kMissingExample);
}

TEST(InstructionTest, IdempotentAndSlotComplete) {
  const auto t = TemplateSet::load_default();
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    AttackContext c;
    // Unique marker tokens that never occur in the template wording.
    auto make = [&](const char* prefix, std::size_t n) {
      std::vector<std::string> v;
      for (std::size_t i = 0; i < n; ++i) v.push_back(std::string(prefix) + std::to_string(trial) + "q" + std::to_string(i));
      return v;
    };
    c.modifiers = make("mod", 1 + rng() % 8);
    c.named_entities = make("Ent", rng() % 4);
    c.general_words = make("word", rng() % 6);
    c.example_prompt = "example " + std::to_string(trial);
    c.history.push_back({"previous zq" + std::to_string(trial), {}});
    const auto a = build_refinement_instruction(c, t);
    const auto b = build_refinement_instruction(c, t);
    EXPECT_EQ(a.text, b.text);
    for (const auto* list : {&c.modifiers, &c.named_entities, &c.general_words}) {
      for (const auto& item : *list) EXPECT_EQ(occurrences(a.text, item), 1u) << item;
    }
    EXPECT_EQ(occurrences(a.text, c.history.back().prompt), 1u);
  }
}

TEST(InstructionTest, DuplicateListEntriesRenderOnce) {
  auto c = fixture_context();
  c.modifiers = {"8k", "8k", "bokeh"};
  const auto text = build_initial_instruction(c, TemplateSet::load_default()).text;
  EXPECT_NE(text.find("images: 8k, bokeh\n"), std::string::npos);
}

TEST(TemplateTest, ParsingAndErrors) {
  const Template t("a {{ modifiers }} b {{example}} {{modifiers}}");
  EXPECT_EQ(t.slots(), (std::vector<std::string>{"modifiers", "example"}));
  EXPECT_EQ(t.render({{"modifiers", "{{example}}"}, {"example", "E"}}), "a {{example}} b E {{example}}");
  EXPECT_EQ(code_of([] { Template("x {{modifiers"); }), ErrorCode::kTemplate);
  EXPECT_EQ(code_of([] { Template("x {{nope}}"); }), ErrorCode::kTemplate);
  EXPECT_EQ(code_of([&] { t.render({{"modifiers", "m"}}); }), ErrorCode::kTemplate);
}

TEST(TemplateTest, LoadChecksRequiredSlots) {
  const auto dir = std::filesystem::temp_directory_path() / "promptrecon_tpl_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "initial.txt") << "{{modifiers}} {{entities}} {{general_words}} {{example}}";
  std::ofstream(dir / "refinement.txt") << "{{modifiers}} {{entities}} {{general_words}} {{example}}";
  EXPECT_EQ(code_of([&] { TemplateSet::load(dir); }), ErrorCode::kTemplate);
  EXPECT_EQ(code_of([&] { TemplateSet::load(dir / "missing"); }), ErrorCode::kIo);
  std::filesystem::remove_all(dir);
}

TEST(ContextJsonTest, RoundTrip) {
  auto c = fixture_context();
  c.target_images = {"target.png"};
  c.history.push_back({"p", {"g1", "g2"}});
  const auto back = AttackContext::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(back.to_json(), c.to_json());
}

std::string words(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

TEST(ValidateCandidateTest, Bounds) {
  const WhitespaceTokenizer tok;
  EXPECT_EQ(validate_candidate(words(14), tok).status, CandidateStatus::kTooShort);
  EXPECT_TRUE(validate_candidate(words(15), tok).ok());
  EXPECT_TRUE(validate_candidate(words(50), tok).ok());
  EXPECT_EQ(validate_candidate(words(51), tok).status, CandidateStatus::kTooLong);
  EXPECT_EQ(validate_candidate(words(78), tok, 15, 200).status, CandidateStatus::kTooLongHard);
  EXPECT_TRUE(validate_candidate(words(77), tok, 15, 200).ok());
  EXPECT_EQ(validate_candidate(words(14), tok).tokens, 14u);
}

TEST(ValidateCandidateTest, OkImpliesWithinBounds) {
  const WhitespaceTokenizer tok;
  std::mt19937_64 rng(5);
  for (int t = 0; t < 500; ++t) {
    const std::size_t lo = rng() % 40;
    const std::size_t hi = lo + rng() % 80;
    const std::size_t n = rng() % 100;
    const auto c = validate_candidate(words(n), tok, lo, hi);
    if (c.ok()) {
      EXPECT_GE(c.tokens, lo);
      EXPECT_LE(c.tokens, hi);
      EXPECT_LE(c.tokens, kHardTokenCeiling);
    }
  }
}

}  // namespace
}  // namespace promptrecon::promptgen
