// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// CLIP-score and Likert aggregation across attack settings, rendered as a
// setting x method table.

#include <array>
#include <compare>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptrecon/orchestrator.hpp"

namespace promptrecon::eval {

using orchestrator::Setting;

struct GroupKey {
  Setting setting = Setting::kMidjourneyMultiple;
  std::string method;

  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

struct ClipSample {
  Setting setting = Setting::kMidjourneyMultiple;
  std::string method;
  double score = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t samples = 0;
};

/// One sample per session: its best-round similarity. Sessions without
/// rounds are skipped.
std::vector<ClipSample> clip_samples(std::span<const orchestrator::AttackSession> sessions);

/// Mean per (setting, method). Errors: kEmptyGroup for no samples,
/// kInvalidArgument for a score outside [-1, 1] or an empty method label.
std::map<GroupKey, Aggregate> aggregate_clip_scores(std::span<const ClipSample> samples);

struct LikertRow {
  std::string annotator;
  std::string sample_id;
  std::string method;
  int score = 0;
};

/// Reads the header `annotator,sample_id,method,score` and its rows. Fields
/// may be double-quoted. Errors: kParse, kScoreOutOfRange naming the 1-based
/// line of a score outside 1..5.
std::vector<LikertRow> read_likert_csv(std::istream& in);

struct LikertAggregate {
  double mean = 0.0;
  std::size_t count = 0;
  /// histogram[s - 1] counts score s.
  std::array<std::size_t, 5> histogram{};
};

/// Mean and score histogram per method. Errors: kEmptyGroup for no rows,
/// kScoreOutOfRange.
std::map<std::string, LikertAggregate> aggregate_likert(std::span<const LikertRow> rows);

/// Likert aggregates per (setting, method), placing each row by its
/// sample_id. Rows for unknown samples are left out.
std::map<GroupKey, LikertAggregate> aggregate_likert_by_setting(std::span<const LikertRow> rows,
                                                                const std::map<std::string, Setting>& sample_settings);

struct Report {
  std::map<GroupKey, Aggregate> clip;
  std::map<std::string, LikertAggregate> likert_by_method;
  std::map<GroupKey, LikertAggregate> likert;

  nlohmann::ordered_json to_json() const;
  /// One row per setting present, columns "<method> CLIP-S" and
  /// "<method> HE" per method in `methods` order (all methods seen, sorted,
  /// when empty). CLIP-S prints four decimals, HE two, a missing cell "-".
  std::string render_table(std::vector<std::string> methods = {}) const;
};

}  // namespace promptrecon::eval
