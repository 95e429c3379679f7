// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Modifier mining and multi-label dataset construction.
//
// Prompts read as "<description>, <modifier>, <modifier>, ...". Mining counts
// every distinct trimmed, lowercased comma segment after the first, at most
// once per prompt, so a frequency is the share of prompts containing the
// modifier. Labels use exact segment equality: "8k resolution" never labels
// "8k".

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptrecon/corpus.hpp"

namespace promptrecon::modifiers {

struct ModifierStat {
  std::string text;
  std::uint64_t count = 0;
  double frequency = 0.0;

  bool operator==(const ModifierStat&) const = default;
};

class ModifierVocabulary {
 public:
  ModifierVocabulary() = default;
  ModifierVocabulary(std::vector<ModifierStat> stats, std::uint64_t corpus_size,
                     std::uint64_t min_count);

  /// Sorted by count descending, ties by text ascending. Position = label id.
  const std::vector<ModifierStat>& stats() const noexcept { return stats_; }
  std::uint64_t corpus_size() const noexcept { return corpus_size_; }
  std::uint64_t min_count() const noexcept { return min_count_; }
  std::size_t size() const noexcept { return stats_.size(); }
  bool empty() const noexcept { return stats_.empty(); }

  std::optional<std::size_t> index_of(std::string_view text) const;
  const std::string& text_of(std::size_t label) const { return stats_.at(label).text; }

  /// JSON array of {text, count, frequency}.
  nlohmann::ordered_json to_json() const;
  static ModifierVocabulary from_json(const nlohmann::json& j);

 private:
  std::vector<ModifierStat> stats_;
  std::uint64_t corpus_size_ = 0;
  std::uint64_t min_count_ = 1;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Trimmed, lowercased comma segments of a prompt body, empty ones dropped,
/// in order (the description segment included).
std::vector<std::string> segments(std::string_view body);

/// Mergeable per-shard counts. merge() is associative and commutative.
class ModifierCounter {
 public:
  void add(std::string_view body);
  void merge(const ModifierCounter& other);

  std::uint64_t prompts() const noexcept { return prompts_; }
  const std::unordered_map<std::string, std::uint64_t>& counts() const noexcept { return counts_; }

  ModifierVocabulary build(std::uint64_t min_count) const;

 private:
  std::uint64_t prompts_ = 0;
  std::unordered_map<std::string, std::uint64_t> counts_;
};

/// Throws Error(kInvalidArgument) when min_count < 1. `shards` > 1 counts
/// contiguous slices on separate threads and merges the results.
ModifierVocabulary mine_modifiers(std::span<const corpus::PromptRecord> records,
                                  std::uint64_t min_count, unsigned shards = 1);

using LabelVector = std::vector<bool>;

/// Throws Error(kEmptyVocabulary) for an empty vocabulary.
LabelVector label_sample(std::string_view body, const ModifierVocabulary& vocabulary);

struct LabeledSample {
  std::uint64_t record_id = 0;
  LabelVector labels;
};

struct ClassifierDataset {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> validation;
};

struct DatasetOptions {
  std::uint64_t min_per_label = 1;
  std::size_t cap = 360000;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

/// Greedy rarest-label-first selection: every label gets
/// min(min_per_label, support) positives while the cap allows, then the
/// remaining budget is filled from a seeded shuffle (labelled records before
/// unlabelled ones). The selection is shuffled again and split.
ClassifierDataset build_classifier_dataset(std::span<const corpus::PromptRecord> records,
                                           const ModifierVocabulary& vocabulary,
                                           const DatasetOptions& options);

/// JSONL, one {record_id, labels:[indices], split:"train"|"validation"} per line.
void write_dataset(std::ostream& out, const ClassifierDataset& dataset);
ClassifierDataset read_dataset(std::istream& in, std::size_t label_count);

}  // namespace promptrecon::modifiers
