// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "promptrecon/bank.hpp"
#include "promptrecon/error.hpp"
#include "text_util.hpp"

namespace promptrecon::bank {

namespace {

const std::unordered_set<std::string_view>& stop_words() {
  static const std::unordered_set<std::string_view> words = {
      "a",    "an",   "and",  "are",  "as",   "at",   "be",   "by",   "for",  "from", "has",
      "he",   "her",  "his",  "in",   "into", "is",   "it",   "its",  "of",   "on",   "or",
      "she",  "that", "the",  "their", "them", "they", "this", "to",   "was",  "with", "while"};
  return words;
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

bool is_segment_break(char c) {
  switch (c) {
    case ',': case '.': case ';': case ':': case '!': case '?': case '|': case '\n':
      return true;
    default:
      return false;
  }
}

// ASCII A-Z, or a two-byte UTF-8 Latin-1 capital (U+00C0..U+00DE minus U+00D7).
bool starts_capitalized(std::string_view w) {
  if (w.empty()) return false;
  const auto c0 = static_cast<unsigned char>(w[0]);
  if (c0 >= 'A' && c0 <= 'Z') return true;
  if (c0 == 0xC3 && w.size() >= 2) {
    const auto c1 = static_cast<unsigned char>(w[1]);
    return c1 >= 0x80 && c1 <= 0x9E && c1 != 0x97;
  }
  return false;
}

// Trims leading and trailing non-word bytes.
std::string_view strip_word(std::string_view w) {
  while (!w.empty() && !is_word_byte(static_cast<unsigned char>(w.front()))) w.remove_prefix(1);
  while (!w.empty() && !is_word_byte(static_cast<unsigned char>(w.back()))) w.remove_suffix(1);
  return w;
}

// Removes a trailing possessive; returns true when one was present.
bool strip_possessive(std::string_view& w) {
  for (std::string_view suffix : {std::string_view("'s"), std::string_view("\xE2\x80\x99s")}) {
    if (w.size() > suffix.size() && w.substr(w.size() - suffix.size()) == suffix) {
      w.remove_suffix(suffix.size());
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<std::string> keyword_terms(std::string_view prompt) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < prompt.size()) {
    while (i < prompt.size() && !is_word_byte(static_cast<unsigned char>(prompt[i]))) ++i;
    const std::size_t start = i;
    while (i < prompt.size() && is_word_byte(static_cast<unsigned char>(prompt[i]))) ++i;
    if (i - start < 2) continue;
    auto term = text::to_lower(prompt.substr(start, i - start));
    if (!stop_words().contains(term)) out.push_back(std::move(term));
  }
  return out;
}

std::vector<std::string> named_entities(std::string_view prompt) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto emit = [&](std::vector<std::string_view>& run) {
    if (!run.empty()) {
      std::string entity;
      for (auto w : run) entity += (entity.empty() ? "" : " ") + std::string(w);
      if (seen.insert(entity).second) out.push_back(std::move(entity));
    }
    run.clear();
  };

  std::size_t seg_start = 0;
  for (std::size_t pos = 0; pos <= prompt.size(); ++pos) {
    if (pos < prompt.size() && !is_segment_break(prompt[pos])) continue;
    // A break character only counts between words, so "St.Louis" or "3.5"
    // stays inside one word when no space follows.
    if (pos < prompt.size() && pos + 1 < prompt.size() && !text::is_space(prompt[pos + 1]) &&
        prompt[pos] == '.') {
      continue;
    }
    const auto segment = prompt.substr(seg_start, pos - seg_start);
    seg_start = pos + 1;

    std::vector<std::string_view> run;
    bool run_at_front = false;
    auto close = [&] {
      if (run_at_front) run.clear();
      emit(run);
      run_at_front = false;
    };
    bool first_word = true;
    for (auto raw : text::split(segment, ' ')) {
      auto w = strip_word(raw);
      if (w.empty()) {
        close();
        continue;
      }
      const bool possessive = strip_possessive(w);
      const bool trailing_punct = !is_word_byte(static_cast<unsigned char>(raw.back()));
      if (starts_capitalized(w)) {
        if (run.empty()) run_at_front = first_word;
        run.push_back(w);
      } else {
        close();
      }
      first_word = false;
      if (possessive || trailing_punct) close();
    }
    close();
  }
  return out;
}

CorpusStats CorpusStats::from_prompts(std::span<const std::string> prompts) {
  CorpusStats s;
  for (const auto& p : prompts) s.add(p);
  return s;
}

void CorpusStats::add(std::string_view prompt) {
  ++documents;
  auto terms = keyword_terms(prompt);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  for (auto& t : terms) ++document_frequency[std::move(t)];
}

nlohmann::ordered_json KeywordReport::to_json() const {
  nlohmann::ordered_json j;
  j["keywords"] = nlohmann::ordered_json::array();
  for (const auto& [term, score] : keywords) j["keywords"].push_back({{"term", term}, {"score", score}});
  j["named_entities"] = named_entities;
  return j;
}

KeywordReport extract_keywords_and_entities(std::span<const Neighbor> neighbors, const CorpusStats& stats,
                                            std::size_t m) {
  if (neighbors.empty()) throw Error(ErrorCode::kInvalidArgument, "keyword extraction needs neighbors");

  std::map<std::string, std::uint64_t> tf;
  std::map<std::string, std::uint64_t> entity_docs;
  for (const auto& n : neighbors) {
    for (auto& t : keyword_terms(n.prompt)) ++tf[std::move(t)];
    for (auto& e : named_entities(n.prompt)) ++entity_docs[std::move(e)];
  }

  const double docs = static_cast<double>(std::max<std::uint64_t>(stats.documents, 1));
  KeywordReport report;
  for (const auto& [term, count] : tf) {
    auto it = stats.document_frequency.find(term);
    const double df = static_cast<double>(std::max<std::uint64_t>(it == stats.document_frequency.end() ? 0 : it->second, 1));
    report.keywords.emplace_back(term, static_cast<double>(count) * std::log(docs / df));
  }
  // std::map iteration gives ascending terms, so a stable sort keeps ties ordered.
  std::stable_sort(report.keywords.begin(), report.keywords.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (report.keywords.size() > m) report.keywords.resize(m);

  std::vector<std::pair<std::string, std::uint64_t>> ents(entity_docs.begin(), entity_docs.end());
  std::stable_sort(ents.begin(), ents.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < ents.size() && i < m; ++i) report.named_entities.push_back(ents[i].first);
  return report;
}

}  // namespace promptrecon::bank
