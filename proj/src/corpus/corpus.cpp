// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <istream>

#include "promptrecon/error.hpp"
#include "text_util.hpp"

namespace promptrecon::corpus {

using namespace std::chrono;

std::string_view to_string(JobKind kind) noexcept {
  switch (kind) {
    case JobKind::kGrid: return "grid";
    case JobKind::kUpscale: return "upscale";
    case JobKind::kUnknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(ModelVersion version) noexcept {
  switch (version) {
    case ModelVersion::kV2: return "V2";
    case ModelVersion::kV3: return "V3";
    case ModelVersion::kV4: return "V4";
    case ModelVersion::kV5: return "V5";
    case ModelVersion::kUnknown: return "unknown";
  }
  return "unknown";
}

std::optional<JobKind> job_kind_from_string(std::string_view text) noexcept {
  for (JobKind k : {JobKind::kGrid, JobKind::kUpscale, JobKind::kUnknown}) {
    if (text == to_string(k)) return k;
  }
  return std::nullopt;
}

std::optional<ModelVersion> model_version_from_string(std::string_view text) noexcept {
  for (ModelVersion v : {ModelVersion::kV2, ModelVersion::kV3, ModelVersion::kV4,
                         ModelVersion::kV5, ModelVersion::kUnknown}) {
    if (text == to_string(v)) return v;
  }
  return std::nullopt;
}

std::string_view to_string(RejectReason reason) noexcept {
  switch (reason) {
    case RejectReason::kEmptyContent: return "EmptyContent";
    case RejectReason::kUnparseable: return "UnparseableContent";
    case RejectReason::kHasUrl: return "HasUrl";
    case RejectReason::kNonEnglish: return "NonEnglish";
    case RejectReason::kTooLong: return "TooLong";
    case RejectReason::kEmpty: return "Empty";
    case RejectReason::kMalformedRow: return "MalformedRow";
  }
  return "Unknown";
}

std::string ParsedPrompt::serialize() const {
  std::string out;
  auto append = [&out](std::string_view piece) {
    if (piece.empty()) return;
    if (!out.empty()) out.push_back(' ');
    out.append(piece);
  };
  for (const auto& url : image_urls) append(url);
  append(body);
  for (const auto& p : parameters) {
    append("--" + p.name);
    if (!p.flag_only) append(p.value);
  }
  return out;
}

// ---- config -----------------------------------------------------------------

std::vector<VersionBoundary> CorpusConfig::default_version_boundaries() {
  // First day of each release month.
  return {
      {sys_days{year{2022} / April / 1}, ModelVersion::kV2},
      {sys_days{year{2022} / July / 1}, ModelVersion::kV3},
      {sys_days{year{2022} / November / 1}, ModelVersion::kV4},
      {sys_days{year{2023} / March / 1}, ModelVersion::kV5},
  };
}

std::vector<JobKindRule> CorpusConfig::default_job_kind_rules() {
  // Upscale markers first: upscale messages also carry a speed marker.
  return {
      {R"(Image #\d+)", JobKind::kUpscale},
      {R"(Upscaled)", JobKind::kUpscale},
      {R"(Variations)", JobKind::kGrid},
      {R"(\((fast|relaxed|turbo)\))", JobKind::kGrid},
  };
}

void CorpusConfig::validate() const {
  for (std::size_t i = 1; i < version_boundaries.size(); ++i) {
    if (!(version_boundaries[i - 1].date < version_boundaries[i].date)) {
      throw Error(ErrorCode::kInvalidArgument, "version_boundaries must be strictly increasing");
    }
  }
  if (!(non_english_max_ratio >= 0.0 && non_english_max_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "non_english_max_ratio must lie in [0,1]");
  }
  if (!tokenizer) throw Error(ErrorCode::kInvalidArgument, "tokenizer is null");
  for (const auto& rule : job_kind_rules) {
    try {
      std::regex re(rule.pattern);
    } catch (const std::regex_error&) {
      throw Error(ErrorCode::kInvalidArgument, "bad job-kind pattern: " + rule.pattern);
    }
  }
}

CorpusConfig CorpusConfig::from_json(const nlohmann::json& j) {
  CorpusConfig c;
  c.token_limit = j.value("token_limit", c.token_limit);
  c.drop_url_prompts = j.value("drop_url_prompts", c.drop_url_prompts);
  c.drop_non_english = j.value("drop_non_english", c.drop_non_english);
  c.non_english_max_ratio = j.value("non_english_max_ratio", c.non_english_max_ratio);
  c.extra_allowed = j.value("extra_allowed", c.extra_allowed);
  if (j.contains("version_boundaries")) {
    c.version_boundaries.clear();
    for (const auto& b : j.at("version_boundaries")) {
      const auto epoch = iso_to_epoch(b.at("date").get<std::string>());
      const auto version = model_version_from_string(b.at("version").get<std::string>());
      if (!epoch || !version) {
        throw Error(ErrorCode::kInvalidArgument, "bad version boundary: " + b.dump());
      }
      c.version_boundaries.push_back(
          {floor<days>(sys_seconds{seconds{*epoch}}), *version});
    }
  }
  if (j.contains("job_kind_rules")) {
    c.job_kind_rules.clear();
    for (const auto& r : j.at("job_kind_rules")) {
      const auto kind = job_kind_from_string(r.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::kInvalidArgument, "bad job kind: " + r.dump());
      c.job_kind_rules.push_back({r.at("pattern").get<std::string>(), *kind});
    }
  }
  if (j.contains("tokenizer")) {
    const auto& t = j.at("tokenizer");
    const std::string kind = t.value("kind", "whitespace");
    if (kind == "bpe") {
      c.tokenizer = std::make_shared<const BpeTokenizer>(
          BpeTokenizer::from_file(t.at("merges").get<std::string>()));
    } else if (kind != "whitespace") {
      throw Error(ErrorCode::kInvalidArgument, "unknown tokenizer kind: " + kind);
    }
  }
  c.validate();
  return c;
}

// ---- primitives -------------------------------------------------------------

std::size_t find_parameter_split(std::string_view prompt) noexcept {
  for (std::size_t i = 0; i + 1 < prompt.size(); ++i) {
    if (prompt[i] == '-' && prompt[i + 1] == '-' &&
        (i == 0 || text::is_space(prompt[i - 1]))) {
      return i;
    }
  }
  return std::string_view::npos;
}

std::vector<Parameter> parse_parameters(std::string_view tail) {
  std::vector<Parameter> params;
  std::optional<Parameter> current;
  auto flush = [&] {
    if (current && !current->name.empty()) {
      current->flag_only = current->value.empty();
      params.push_back(std::move(*current));
    }
    current.reset();
  };
  for (const auto& token : split_whitespace(tail)) {
    if (token.size() >= 2 && token[0] == '-' && token[1] == '-') {
      flush();
      current = Parameter{text::to_lower(token.substr(2)), "", false};
    } else if (current) {
      if (!current->value.empty()) current->value.push_back(' ');
      current->value += token;
    }
  }
  flush();
  return params;
}

std::string epoch_to_iso(std::int64_t epoch) {
  if (epoch < 0) throw Error(ErrorCode::kNegativeEpoch, std::to_string(epoch));
  const sys_seconds tp{seconds{epoch}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::optional<std::int64_t> iso_to_epoch(std::string_view s) noexcept {
  auto digits = [&](std::size_t pos, std::size_t n) -> std::optional<int> {
    if (pos + n > s.size()) return std::nullopt;
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  const auto y = digits(0, 4);
  const auto mo = digits(5, 2);
  const auto d = digits(8, 2);
  if (!y || !mo || !d || s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)},
                           day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t secs = sys_seconds{sys_days{ymd}}.time_since_epoch().count();
  std::size_t pos = 10;
  if (pos == s.size()) return secs;
  if (s[pos] != 'T' && s[pos] != ' ') return std::nullopt;
  const auto hh = digits(pos + 1, 2);
  const auto mm = digits(pos + 4, 2);
  const auto ss = digits(pos + 7, 2);
  if (!hh || !mm || !ss || s[pos + 3] != ':' || s[pos + 6] != ':') return std::nullopt;
  if (*hh > 23 || *mm > 59 || *ss > 60) return std::nullopt;
  secs += *hh * 3600 + *mm * 60 + *ss;
  pos += 9;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  if (pos == s.size()) return secs;
  if (s[pos] == 'Z' && pos + 1 == s.size()) return secs;
  if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
    const auto oh = digits(pos + 1, 2);
    const auto om = digits(pos + 4, 2);
    if (!oh || !om) return std::nullopt;
    const std::int64_t offset = *oh * 3600 + *om * 60;
    return s[pos] == '+' ? secs - offset : secs + offset;
  }
  return std::nullopt;
}

ModelVersion infer_version(std::string_view timestamp_utc,
                           std::span<const VersionBoundary> boundaries) {
  const auto epoch = iso_to_epoch(timestamp_utc);
  if (!epoch) return ModelVersion::kUnknown;
  const sys_seconds tp{seconds{*epoch}};
  ModelVersion result = ModelVersion::kUnknown;
  for (const auto& b : boundaries) {
    if (sys_seconds{b.date} <= tp) result = b.version;
    else break;
  }
  return result;
}

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer) {
  return tokenizer.count(text);
}

namespace {

bool is_emoji(char32_t cp) noexcept {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) ||
         (cp >= 0x2B00 && cp <= 0x2BFF) || (cp >= 0xFE00 && cp <= 0xFE0F) || cp == 0x200D ||
         cp == 0x20E3 || cp == 0x3030 || cp == 0x303D || (cp >= 0xE0020 && cp <= 0xE007F);
}

// Discord custom emoji: <:name:id> or <a:name:id>.
bool has_custom_emoji(std::string_view text) {
  static const std::regex re(R"(<a?:[A-Za-z0-9_~]+:\d+>)");
  return std::regex_search(text.begin(), text.end(), re);
}

bool has_url(std::string_view text) noexcept {
  return text.find("http://") != std::string_view::npos ||
         text.find("https://") != std::string_view::npos;
}

bool is_url_token(std::string_view token) noexcept {
  if (token.size() > 2 && token.front() == '<' && token.back() == '>') {
    token = token.substr(1, token.size() - 2);
  }
  return token.rfind("http://", 0) == 0 || token.rfind("https://", 0) == 0;
}

}  // namespace

bool is_non_english(std::string_view body, const CorpusConfig& config) {
  if (has_custom_emoji(body)) return true;
  const std::u32string extra = text::decode_utf8(config.extra_allowed);
  const std::u32string cps = text::decode_utf8(body);
  if (cps.empty()) return false;
  std::size_t outside = 0;
  for (char32_t cp : cps) {
    if (is_emoji(cp)) return true;
    const bool allowed = cp < 0x80 || extra.find(cp) != std::u32string::npos;
    if (!allowed) ++outside;
  }
  return static_cast<double>(outside) > config.non_english_max_ratio * static_cast<double>(cps.size());
}

// ---- row parser -------------------------------------------------------------

RowParser::RowParser(CorpusConfig config) : config_(std::move(config)) {
  config_.validate();
  for (const auto& rule : config_.job_kind_rules) {
    compiled_rules_.emplace_back(std::regex(rule.pattern), rule.kind);
  }
}

std::optional<ParsedPrompt> RowParser::parse_content(std::string_view content) const {
  content = text::trim(content);
  std::string_view prompt = content;
  std::string_view tail;
  if (content.rfind("**", 0) == 0) {
    const std::size_t close = content.rfind("**");
    if (close < 2) return std::nullopt;
    prompt = text::trim(content.substr(2, close - 2));
    tail = content.substr(close + 2);
  }

  ParsedPrompt parsed;
  for (const auto& [re, kind] : compiled_rules_) {
    if (std::regex_search(tail.begin(), tail.end(), re)) {
      parsed.job_kind = kind;
      break;
    }
  }

  // Leading image URLs.
  while (true) {
    prompt = text::trim(prompt);
    std::size_t end = 0;
    while (end < prompt.size() && !text::is_space(prompt[end])) ++end;
    const std::string_view token = prompt.substr(0, end);
    if (token.empty() || !is_url_token(token)) break;
    std::string url(token);
    if (url.front() == '<') url = url.substr(1, url.size() - 2);
    parsed.image_urls.push_back(std::move(url));
    prompt.remove_prefix(end);
  }

  const std::size_t split = find_parameter_split(prompt);
  if (split == std::string_view::npos) {
    parsed.body = std::string(text::trim(prompt));
  } else {
    parsed.body = std::string(text::trim(prompt.substr(0, split)));
    parsed.parameters = parse_parameters(prompt.substr(split));
  }
  return parsed;
}

RowOutcome RowParser::parse(const RawExportRow& row, std::uint64_t id) const {
  const std::string_view content = text::trim(row.content);
  if (content.empty() || content == "NaN" || content == "nan") return RejectReason::kEmptyContent;
  if (row.date < 0) return RejectReason::kUnparseable;

  auto parsed = parse_content(content);
  if (!parsed) return RejectReason::kUnparseable;

  if (config_.drop_url_prompts && (!parsed->image_urls.empty() || has_url(parsed->body))) {
    return RejectReason::kHasUrl;
  }
  if (parsed->body.empty()) return RejectReason::kEmpty;
  if (config_.drop_non_english && is_non_english(parsed->body, config_)) {
    return RejectReason::kNonEnglish;
  }
  const std::size_t tokens = count_tokens(parsed->body, *config_.tokenizer);
  if (tokens > config_.token_limit) return RejectReason::kTooLong;

  PromptRecord record;
  record.id = id;
  record.prompt = std::move(*parsed);
  record.timestamp_utc = epoch_to_iso(row.date);
  record.model_version = infer_version(record.timestamp_utc, config_.version_boundaries);
  record.attachment = row.attachment;
  record.token_count = tokens;
  return record;
}

RowOutcome parse_export_row(const RawExportRow& row, std::uint64_t id, const CorpusConfig& config) {
  return RowParser(config).parse(row, id);
}

// ---- streaming --------------------------------------------------------------

std::uint64_t FilterStats::rejected_total() const noexcept {
  std::uint64_t total = 0;
  for (auto n : rejected) total += n;
  return total;
}

nlohmann::ordered_json FilterStats::to_json() const {
  nlohmann::ordered_json j;
  j["input"] = input;
  j["kept"] = kept;
  nlohmann::ordered_json r = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kRejectReasonCount; ++i) {
    r[std::string(to_string(static_cast<RejectReason>(i)))] = rejected[i];
  }
  j["rejected"] = std::move(r);
  return j;
}

FilterStats clean_corpus(RowReader& rows, const RowParser& parser,
                         const std::function<void(const PromptRecord&)>& sink) {
  FilterStats stats;
  std::uint64_t position = 0;
  while (auto result = rows.next()) {
    const std::uint64_t id = position++;
    ++stats.input;
    if (!result->row) {
      ++stats.rejected[static_cast<std::size_t>(RejectReason::kMalformedRow)];
      continue;
    }
    auto outcome = parser.parse(*result->row, id);
    if (auto* record = std::get_if<PromptRecord>(&outcome)) {
      ++stats.kept;
      sink(*record);
    } else {
      ++stats.rejected[static_cast<std::size_t>(std::get<RejectReason>(outcome))];
    }
  }
  return stats;
}

// ---- record JSON ------------------------------------------------------------

nlohmann::ordered_json record_to_json(const PromptRecord& record) {
  nlohmann::ordered_json j;
  j["id"] = record.id;
  j["body"] = record.prompt.body;
  auto params = nlohmann::ordered_json::array();
  for (const auto& p : record.prompt.parameters) {
    nlohmann::ordered_json pj;
    pj["name"] = p.name;
    pj["value"] = p.value;
    pj["flag"] = p.flag_only;
    params.push_back(std::move(pj));
  }
  j["parameters"] = std::move(params);
  j["job_kind"] = to_string(record.prompt.job_kind);
  j["timestamp_utc"] = record.timestamp_utc;
  j["model_version"] = to_string(record.model_version);
  j["attachment"] = record.attachment;
  j["token_count"] = record.token_count;
  if (!record.prompt.image_urls.empty()) j["image_urls"] = record.prompt.image_urls;
  return j;
}

PromptRecord record_from_json(const nlohmann::json& j) {
  PromptRecord r;
  r.id = j.at("id").get<std::uint64_t>();
  r.prompt.body = j.at("body").get<std::string>();
  if (j.contains("parameters")) {
    for (const auto& p : j.at("parameters")) {
      r.prompt.parameters.push_back(
          {p.at("name").get<std::string>(), p.value("value", ""), p.value("flag", false)});
    }
  }
  r.prompt.job_kind = job_kind_from_string(j.value("job_kind", "unknown")).value_or(JobKind::kUnknown);
  r.timestamp_utc = j.value("timestamp_utc", "");
  r.model_version =
      model_version_from_string(j.value("model_version", "unknown")).value_or(ModelVersion::kUnknown);
  r.attachment = j.value("attachment", "");
  r.token_count = j.value("token_count", std::size_t{0});
  if (j.contains("image_urls")) r.prompt.image_urls = j.at("image_urls").get<std::vector<std::string>>();
  return r;
}

std::vector<PromptRecord> read_records(std::istream& in) {
  std::vector<PromptRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "record line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace promptrecon::corpus
