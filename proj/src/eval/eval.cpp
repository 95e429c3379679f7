// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "promptrecon/error.hpp"
#include "text_util.hpp"

namespace promptrecon::eval {

std::vector<ClipSample> clip_samples(std::span<const orchestrator::AttackSession> sessions) {
  std::vector<ClipSample> out;
  for (const auto& s : sessions) {
    if (!s.rounds.empty()) out.push_back({s.setting, s.method, s.best_similarity()});
  }
  return out;
}

std::map<GroupKey, Aggregate> aggregate_clip_scores(std::span<const ClipSample> samples) {
  if (samples.empty()) throw Error(ErrorCode::kEmptyGroup, "no CLIP-score samples to aggregate");
  std::map<GroupKey, std::vector<double>> groups;
  for (const auto& s : samples) {
    if (!(s.score >= -1.0 && s.score <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "CLIP-score outside [-1, 1]: " + std::to_string(s.score));
    }
    if (s.method.empty()) throw Error(ErrorCode::kInvalidArgument, "sample without a method label");
    groups[{s.setting, s.method}].push_back(s.score);
  }
  std::map<GroupKey, Aggregate> out;
  for (auto& [key, scores] : groups) {
    // Sorting makes the sum independent of input order.
    std::sort(scores.begin(), scores.end());
    double sum = 0.0;
    for (double v : scores) sum += v;
    out[key] = {sum / static_cast<double>(scores.size()), scores.front(), scores.back(), scores.size()};
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back().push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back().push_back(c);
    }
  }
  if (quoted) throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": unterminated quote");
  return fields;
}

void check_score(int score, const std::string& where) {
  if (score < 1 || score > 5) {
    throw Error(ErrorCode::kScoreOutOfRange, where + ": score " + std::to_string(score) + " is outside 1..5");
  }
}

}  // namespace

std::vector<LikertRow> read_likert_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<LikertRow> rows;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (text::trim(line).empty()) continue;
    auto fields = split_csv_line(line, line_no);
    for (auto& f : fields) f = std::string(text::trim(f));
    if (!header) {
      if (fields != std::vector<std::string>{"annotator", "sample_id", "method", "score"}) {
        throw Error(ErrorCode::kParse, "expected header annotator,sample_id,method,score");
      }
      header = true;
      continue;
    }
    const auto where = "line " + std::to_string(line_no);
    if (fields.size() != 4) throw Error(ErrorCode::kParse, where + ": expected 4 fields, got " + std::to_string(fields.size()));
    int score = 0;
    const auto& s = fields[3];
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), score);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      if (ec == std::errc::result_out_of_range) throw Error(ErrorCode::kScoreOutOfRange, where + ": score " + s + " is outside 1..5");
      throw Error(ErrorCode::kParse, where + ": score '" + s + "' is not an integer");
    }
    check_score(score, where);
    rows.push_back({fields[0], fields[1], fields[2], score});
  }
  if (!header) throw Error(ErrorCode::kParse, "empty human-evaluation CSV");
  return rows;
}

namespace {

void add(LikertAggregate& a, int score) {
  ++a.histogram[static_cast<std::size_t>(score - 1)];
  ++a.count;
}

void finish(LikertAggregate& a) {
  std::size_t total = 0;
  for (std::size_t s = 0; s < 5; ++s) total += (s + 1) * a.histogram[s];
  a.mean = static_cast<double>(total) / static_cast<double>(a.count);
}

}  // namespace

std::map<std::string, LikertAggregate> aggregate_likert(std::span<const LikertRow> rows) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyGroup, "no human-evaluation rows");
  std::map<std::string, LikertAggregate> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    check_score(rows[i].score, "row " + std::to_string(i + 1));
    add(out[rows[i].method], rows[i].score);
  }
  for (auto& [method, a] : out) finish(a);
  return out;
}

std::map<GroupKey, LikertAggregate> aggregate_likert_by_setting(std::span<const LikertRow> rows,
                                                                const std::map<std::string, Setting>& sample_settings) {
  std::map<GroupKey, LikertAggregate> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    check_score(rows[i].score, "row " + std::to_string(i + 1));
    const auto it = sample_settings.find(rows[i].sample_id);
    if (it != sample_settings.end()) add(out[{it->second, rows[i].method}], rows[i].score);
  }
  for (auto& [key, a] : out) finish(a);
  return out;
}

nlohmann::ordered_json Report::to_json() const {
  nlohmann::ordered_json j;
  j["clip_scores"] = nlohmann::ordered_json::array();
  for (const auto& [key, a] : clip) {
    j["clip_scores"].push_back({{"setting", orchestrator::to_string(key.setting)},
                                {"method", key.method},
                                {"mean", a.mean},
                                {"min", a.min},
                                {"max", a.max},
                                {"samples", a.samples}});
  }
  auto likert_json = [](const LikertAggregate& a) {
    return nlohmann::ordered_json{{"mean", a.mean}, {"count", a.count}, {"histogram", a.histogram}};
  };
  j["human_eval_by_method"] = nlohmann::ordered_json::object();
  for (const auto& [method, a] : likert_by_method) j["human_eval_by_method"][method] = likert_json(a);
  j["human_eval"] = nlohmann::ordered_json::array();
  for (const auto& [key, a] : likert) {
    auto o = likert_json(a);
    o["setting"] = orchestrator::to_string(key.setting);
    o["method"] = key.method;
    j["human_eval"].push_back(std::move(o));
  }
  return j;
}

namespace {

std::string fixed(double v, int places) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(places) << v;
  return out.str();
}

}  // namespace

std::string Report::render_table(std::vector<std::string> methods) const {
  if (methods.empty()) {
    std::set<std::string> seen;
    for (const auto& [key, a] : clip) seen.insert(key.method);
    for (const auto& [key, a] : likert) seen.insert(key.method);
    methods.assign(seen.begin(), seen.end());
  }
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"Setting"};
  for (const auto& m : methods) {
    header.push_back(m + " CLIP-S");
    header.push_back(m + " HE");
  }
  table.push_back(header);
  for (auto setting : orchestrator::kAllSettings) {
    std::vector<std::string> row{std::string(orchestrator::to_string(setting))};
    bool any = false;
    for (const auto& m : methods) {
      const auto c = clip.find({setting, m});
      const auto h = likert.find({setting, m});
      any = any || c != clip.end() || h != likert.end();
      row.push_back(c != clip.end() ? fixed(c->second.mean, 4) : "-");
      row.push_back(h != likert.end() ? fixed(h->second.mean, 2) : "-");
    }
    if (any) table.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    out << '|';
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << ' ' << row[c] << std::string(width[c] - row[c].size(), ' ') << " |";
    }
    out << '\n';
  };
  emit(table.front());
  out << '|';
  for (auto w : width) out << std::string(w + 2, '-') << '|';
  out << '\n';
  for (std::size_t r = 1; r < table.size(); ++r) emit(table[r]);
  return out.str();
}

}  // namespace promptrecon::eval
