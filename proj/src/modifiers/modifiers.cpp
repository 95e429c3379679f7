// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/modifiers.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>
#include <unordered_set>

#include "promptrecon/error.hpp"
#include "text_util.hpp"

namespace promptrecon::modifiers {

ModifierVocabulary::ModifierVocabulary(std::vector<ModifierStat> stats, std::uint64_t corpus_size,
                                       std::uint64_t min_count)
    : stats_(std::move(stats)), corpus_size_(corpus_size), min_count_(min_count) {
  std::stable_sort(stats_.begin(), stats_.end(), [](const ModifierStat& a, const ModifierStat& b) {
    return a.count != b.count ? a.count > b.count : a.text < b.text;
  });
  for (std::size_t i = 0; i < stats_.size(); ++i) index_.emplace(stats_[i].text, i);
}

std::optional<std::size_t> ModifierVocabulary::index_of(std::string_view text) const {
  auto it = index_.find(std::string(text));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

nlohmann::ordered_json ModifierVocabulary::to_json() const {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : stats_) {
    nlohmann::ordered_json j;
    j["text"] = s.text;
    j["count"] = s.count;
    j["frequency"] = s.frequency;
    arr.push_back(std::move(j));
  }
  return arr;
}

ModifierVocabulary ModifierVocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kParse, "vocabulary must be a JSON array");
  std::vector<ModifierStat> stats;
  std::uint64_t corpus_size = 0;
  std::uint64_t min_count = 0;
  for (const auto& e : j) {
    ModifierStat s{e.at("text").get<std::string>(), e.at("count").get<std::uint64_t>(),
                   e.at("frequency").get<double>()};
    if (s.text.empty() || s.count == 0 || !(s.frequency > 0.0 && s.frequency <= 1.0)) {
      throw Error(ErrorCode::kParse, "bad vocabulary entry: " + e.dump());
    }
    if (corpus_size == 0) {
      corpus_size = static_cast<std::uint64_t>(std::llround(static_cast<double>(s.count) / s.frequency));
    }
    min_count = min_count == 0 ? s.count : std::min(min_count, s.count);
    stats.push_back(std::move(s));
  }
  return ModifierVocabulary(std::move(stats), corpus_size, std::max<std::uint64_t>(min_count, 1));
}

std::vector<std::string> segments(std::string_view body) {
  std::vector<std::string> out;
  for (auto piece : text::split(body, ',')) {
    piece = text::trim(piece);
    if (!piece.empty()) out.push_back(text::to_lower(piece));
  }
  return out;
}

void ModifierCounter::add(std::string_view body) {
  ++prompts_;
  const auto segs = segments(body);
  // The first raw segment is the description; segments() has already dropped
  // it when it is blank.
  const auto raw = text::split(body, ',');
  const std::size_t skip = (!raw.empty() && text::trim(raw.front()).empty()) ? 0 : 1;
  std::unordered_set<std::string> seen;
  for (std::size_t i = skip; i < segs.size(); ++i) {
    if (seen.insert(segs[i]).second) ++counts_[segs[i]];
  }
}

void ModifierCounter::merge(const ModifierCounter& other) {
  prompts_ += other.prompts_;
  for (const auto& [text, n] : other.counts_) counts_[text] += n;
}

ModifierVocabulary ModifierCounter::build(std::uint64_t min_count) const {
  if (min_count < 1) throw Error(ErrorCode::kInvalidArgument, "min_count must be >= 1");
  std::vector<ModifierStat> stats;
  for (const auto& [text, n] : counts_) {
    if (n >= min_count) {
      stats.push_back({text, n, static_cast<double>(n) / static_cast<double>(prompts_)});
    }
  }
  return ModifierVocabulary(std::move(stats), prompts_, min_count);
}

ModifierVocabulary mine_modifiers(std::span<const corpus::PromptRecord> records,
                                  std::uint64_t min_count, unsigned shards) {
  if (min_count < 1) throw Error(ErrorCode::kInvalidArgument, "min_count must be >= 1");
  shards = std::max(1u, std::min<unsigned>(shards, static_cast<unsigned>(records.size() ? records.size() : 1)));
  std::vector<ModifierCounter> counters(shards);
  const std::size_t per_shard = (records.size() + shards - 1) / shards;
  auto count_slice = [&](unsigned s) {
    const std::size_t begin = s * per_shard;
    const std::size_t end = std::min(records.size(), begin + per_shard);
    for (std::size_t i = begin; i < end; ++i) counters[s].add(records[i].prompt.body);
  };
  if (shards == 1) {
    count_slice(0);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned s = 0; s < shards; ++s) workers.emplace_back(count_slice, s);
  }
  for (unsigned s = 1; s < shards; ++s) counters[0].merge(counters[s]);
  return counters[0].build(min_count);
}

LabelVector label_sample(std::string_view body, const ModifierVocabulary& vocabulary) {
  if (vocabulary.empty()) throw Error(ErrorCode::kEmptyVocabulary, "cannot label against an empty vocabulary");
  LabelVector labels(vocabulary.size(), false);
  for (const auto& seg : segments(body)) {
    if (auto idx = vocabulary.index_of(seg)) labels[*idx] = true;
  }
  return labels;
}

ClassifierDataset build_classifier_dataset(std::span<const corpus::PromptRecord> records,
                                           const ModifierVocabulary& vocabulary,
                                           const DatasetOptions& options) {
  if (vocabulary.empty()) throw Error(ErrorCode::kEmptyVocabulary, "dataset needs a vocabulary");
  if (options.min_per_label < 1) throw Error(ErrorCode::kInvalidArgument, "min_per_label must be >= 1");
  if (!(options.validation_fraction >= 0.0 && options.validation_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "validation_fraction must lie in [0,1)");
  }

  const std::size_t n = records.size();
  const std::size_t labels_n = vocabulary.size();
  std::vector<LabelVector> labels(n);
  std::vector<std::uint64_t> support(labels_n, 0);
  std::vector<std::vector<std::size_t>> positives(labels_n);
  for (std::size_t r = 0; r < n; ++r) {
    labels[r] = label_sample(records[r].prompt.body, vocabulary);
    for (std::size_t l = 0; l < labels_n; ++l) {
      if (labels[r][l]) ++support[l];
    }
  }

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[order[i]] = i;
  for (std::size_t r : order) {
    for (std::size_t l = 0; l < labels_n; ++l) {
      if (labels[r][l]) positives[l].push_back(r);
    }
  }

  std::vector<bool> selected(n, false);
  std::vector<std::size_t> chosen;
  std::vector<std::uint64_t> covered(labels_n, 0);
  auto take = [&](std::size_t r) {
    selected[r] = true;
    chosen.push_back(r);
    for (std::size_t l = 0; l < labels_n; ++l) {
      if (labels[r][l]) ++covered[l];
    }
  };

  std::vector<std::size_t> label_order(labels_n);
  std::iota(label_order.begin(), label_order.end(), 0);
  std::stable_sort(label_order.begin(), label_order.end(),
                   [&](std::size_t a, std::size_t b) { return support[a] < support[b]; });
  for (std::size_t l : label_order) {
    const std::uint64_t need = std::min(options.min_per_label, support[l]);
    for (std::size_t r : positives[l]) {
      if (covered[l] >= need || chosen.size() >= options.cap) break;
      if (!selected[r]) take(r);
    }
  }
  for (int pass = 0; pass < 2 && chosen.size() < options.cap; ++pass) {
    for (std::size_t r : order) {
      if (chosen.size() >= options.cap) break;
      const bool labelled = std::find(labels[r].begin(), labels[r].end(), true) != labels[r].end();
      if (!selected[r] && labelled == (pass == 0)) take(r);
    }
  }

  std::sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
  std::shuffle(chosen.begin(), chosen.end(), rng);
  const auto val_count = static_cast<std::size_t>(
      std::llround(static_cast<double>(chosen.size()) * options.validation_fraction));

  ClassifierDataset ds;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    LabeledSample s{records[chosen[i]].id, std::move(labels[chosen[i]])};
    (i < chosen.size() - val_count ? ds.train : ds.validation).push_back(std::move(s));
  }
  return ds;
}

namespace {

void write_split(std::ostream& out, const std::vector<LabeledSample>& samples, std::string_view split) {
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    j["record_id"] = s.record_id;
    auto idx = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < s.labels.size(); ++l) {
      if (s.labels[l]) idx.push_back(l);
    }
    j["labels"] = std::move(idx);
    j["split"] = split;
    out << j.dump() << '\n';
  }
}

}  // namespace

void write_dataset(std::ostream& out, const ClassifierDataset& dataset) {
  write_split(out, dataset.train, "train");
  write_split(out, dataset.validation, "validation");
}

ClassifierDataset read_dataset(std::istream& in, std::size_t label_count) {
  ClassifierDataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabeledSample s{j.at("record_id").get<std::uint64_t>(), LabelVector(label_count, false)};
      for (const auto& idx : j.at("labels")) {
        const auto l = idx.get<std::size_t>();
        if (l >= label_count) {
          throw Error(ErrorCode::kParse, "label index " + std::to_string(l) + " out of range on line " +
                                             std::to_string(line_no));
        }
        s.labels[l] = true;
      }
      (j.value("split", "train") == "validation" ? ds.validation : ds.train).push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

}  // namespace promptrecon::modifiers
