// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace promptrecon {

/// Counts tokens for the 77-token retention filter and the 15-50 candidate
/// bounds. Implementations must be deterministic and thread-safe.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t count(std::string_view text) const = 0;
  virtual std::string_view name() const noexcept = 0;
};

/// Splits on ASCII whitespace. The default everywhere.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override;
  std::string_view name() const noexcept override { return "whitespace"; }
};

/// Byte-pair-encoding tokenizer driven by a merges file in the CLIP layout: an
/// optional "#version" first line, then one "left right" merge per line in
/// priority order. Text is lowercased, split into words on whitespace and at
/// letter/digit/punctuation boundaries, and each word ends with "</w>".
/// Counts do not include start/end-of-text markers.
class BpeTokenizer final : public Tokenizer {
 public:
  explicit BpeTokenizer(std::vector<std::pair<std::string, std::string>> merges);
  static BpeTokenizer from_file(const std::filesystem::path& merges_path);

  std::size_t count(std::string_view text) const override;
  std::string_view name() const noexcept override { return "bpe"; }

  std::vector<std::string> encode_word(std::string_view word) const;

 private:
  std::map<std::pair<std::string, std::string>, std::size_t> ranks_;
};

std::vector<std::string> split_whitespace(std::string_view text);

std::shared_ptr<const Tokenizer> default_tokenizer();

}  // namespace promptrecon
