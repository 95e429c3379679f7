// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/tokenizer.hpp"

#include <cctype>
#include <fstream>
#include <limits>

#include "promptrecon/error.hpp"

namespace promptrecon {
namespace {

bool is_space(char c) noexcept { return std::isspace(static_cast<unsigned char>(c)) != 0; }

enum class CharClass { kLetter, kDigit, kOther };

CharClass classify(unsigned char c) noexcept {
  if (std::isalpha(c) || c >= 0x80) return CharClass::kLetter;
  if (std::isdigit(c)) return CharClass::kDigit;
  return CharClass::kOther;
}

// Pre-tokenization close to CLIP's: runs of letters, single digits, runs of
// other non-space symbols.
std::vector<std::string> pre_tokenize(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  CharClass current_class = CharClass::kOther;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (is_space(raw)) {
      flush();
      continue;
    }
    const CharClass cls = classify(c);
    if (!current.empty() && (cls != current_class || cls == CharClass::kDigit)) flush();
    current.push_back(static_cast<char>(std::tolower(c)));
    current_class = cls;
  }
  flush();
  return words;
}

}  // namespace

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

BpeTokenizer::BpeTokenizer(std::vector<std::pair<std::string, std::string>> merges) {
  for (std::size_t i = 0; i < merges.size(); ++i) ranks_.emplace(std::move(merges[i]), i);
}

BpeTokenizer BpeTokenizer::from_file(const std::filesystem::path& merges_path) {
  std::ifstream in(merges_path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open merges file " + merges_path.string());
  std::vector<std::pair<std::string, std::string>> merges;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && line.rfind("#version", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    const auto parts = split_whitespace(line);
    if (parts.size() != 2) continue;
    merges.emplace_back(parts[0], parts[1]);
  }
  return BpeTokenizer(std::move(merges));
}

std::vector<std::string> BpeTokenizer::encode_word(std::string_view word) const {
  std::vector<std::string> symbols;
  for (std::size_t i = 0; i < word.size();) {
    // Keep UTF-8 sequences together as one initial symbol.
    const auto lead = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    if (i + len > word.size()) len = word.size() - i;
    symbols.emplace_back(word.substr(i, len));
    i += len;
  }
  if (symbols.empty()) return symbols;
  symbols.back() += "</w>";

  while (symbols.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best_at = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = ranks_.find({symbols[i], symbols[i + 1]});
      if (it != ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_at = i;
      }
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    // Merge every occurrence of the best pair in one left-to-right sweep.
    const std::string left = symbols[best_at];
    const std::string right = symbols[best_at + 1];
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        merged.push_back(left + right);
        i += 2;
      } else {
        merged.push_back(std::move(symbols[i]));
        ++i;
      }
    }
    symbols = std::move(merged);
  }
  return symbols;
}

std::size_t BpeTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  for (const auto& word : pre_tokenize(text)) n += encode_word(word).size();
  return n;
}

std::shared_ptr<const Tokenizer> default_tokenizer() {
  static const auto instance = std::make_shared<const WhitespaceTokenizer>();
  return instance;
}

}  // namespace promptrecon
