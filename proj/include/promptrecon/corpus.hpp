// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Parsing of chat-export rows into clean prompt records.
//
// A row's Content field follows the bot's message layout:
//
//   **[<image-url> ...] <prompt body> [--param [value] ...]** - <@user> (fast)
//
// The bold wrapper and the trailing " - <mention> <marker>" part are optional;
// a bare prompt is accepted as-is. The marker after the wrapper decides the
// job kind (grid vs upscale) through configurable regex rules.

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptrecon/tokenizer.hpp"

namespace promptrecon::corpus {

struct RawExportRow {
  std::string author_id;
  std::string author;
  std::int64_t date = 0;  // epoch seconds
  std::string content;
  std::string attachment;
  std::string reactions;
};

struct Parameter {
  std::string name;
  std::string value;
  bool flag_only = false;

  bool operator==(const Parameter&) const = default;
};

enum class JobKind { kGrid, kUpscale, kUnknown };
enum class ModelVersion { kV2, kV3, kV4, kV5, kUnknown };

std::string_view to_string(JobKind kind) noexcept;
std::string_view to_string(ModelVersion version) noexcept;
std::optional<JobKind> job_kind_from_string(std::string_view text) noexcept;
std::optional<ModelVersion> model_version_from_string(std::string_view text) noexcept;

struct ParsedPrompt {
  std::vector<std::string> image_urls;
  std::string body;
  std::vector<Parameter> parameters;
  JobKind job_kind = JobKind::kUnknown;

  /// URLs, body and "--name value" parameters joined by single spaces.
  std::string serialize() const;
};

struct PromptRecord {
  std::uint64_t id = 0;
  ParsedPrompt prompt;
  std::string timestamp_utc;
  ModelVersion model_version = ModelVersion::kUnknown;
  std::string attachment;
  std::size_t token_count = 0;
};

struct VersionBoundary {
  std::chrono::sys_days date;
  ModelVersion version;
};

struct JobKindRule {
  std::string pattern;  // ECMAScript regex searched in the message tail
  JobKind kind;
};

struct CorpusConfig {
  std::size_t token_limit = 77;
  bool drop_url_prompts = true;
  bool drop_non_english = true;
  // Share of code points outside the allow-set above which a prompt counts as
  // non-English. Emoji reject regardless.
  double non_english_max_ratio = 0.05;
  // Code points allowed beyond ASCII, as UTF-8.
  std::string extra_allowed = "‘’“”–—…";
  std::vector<VersionBoundary> version_boundaries = default_version_boundaries();
  std::vector<JobKindRule> job_kind_rules = default_job_kind_rules();
  std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer();

  static std::vector<VersionBoundary> default_version_boundaries();
  static std::vector<JobKindRule> default_job_kind_rules();

  /// Throws Error(kInvalidArgument) on unsorted boundaries or a bad regex.
  void validate() const;

  /// Keys: token_limit, drop_url_prompts, drop_non_english,
  /// non_english_max_ratio, extra_allowed, version_boundaries
  /// [{date:"YYYY-MM-DD", version:"V5"}], job_kind_rules [{pattern, kind}],
  /// tokenizer {kind:"whitespace"|"bpe", merges:path}. Missing keys keep
  /// their defaults.
  static CorpusConfig from_json(const nlohmann::json& j);
};

enum class RejectReason {
  kEmptyContent,
  kUnparseable,
  kHasUrl,
  kNonEnglish,
  kTooLong,
  kEmpty,
  kMalformedRow,  // the reader could not decode the row at all
};
inline constexpr std::size_t kRejectReasonCount = 7;

std::string_view to_string(RejectReason reason) noexcept;

using RowOutcome = std::variant<PromptRecord, RejectReason>;

/// Parses rows against one config; compiles the job-kind rules once.
class RowParser {
 public:
  explicit RowParser(CorpusConfig config);

  RowOutcome parse(const RawExportRow& row, std::uint64_t id) const;

  /// Content grammar only (no filters). nullopt when no prompt can be found.
  std::optional<ParsedPrompt> parse_content(std::string_view content) const;

  const CorpusConfig& config() const noexcept { return config_; }

 private:
  CorpusConfig config_;
  std::vector<std::pair<std::regex, JobKind>> compiled_rules_;
};

RowOutcome parse_export_row(const RawExportRow& row, std::uint64_t id = 0,
                            const CorpusConfig& config = {});

/// `tail` starts at the first " --"; names come back lowercase, valueless
/// parameters as flag-only, and a bare "--" is dropped.
std::vector<Parameter> parse_parameters(std::string_view tail);

/// Position of the first "--" at the start of the text or after whitespace,
/// or npos.
std::size_t find_parameter_split(std::string_view prompt) noexcept;

/// Throws Error(kNegativeEpoch) for epoch < 0.
std::string epoch_to_iso(std::int64_t epoch);

/// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS" with optional fraction and
/// "Z" / "+HH:MM" offset. nullopt when malformed.
std::optional<std::int64_t> iso_to_epoch(std::string_view text) noexcept;

ModelVersion infer_version(std::string_view timestamp_utc,
                           std::span<const VersionBoundary> boundaries);

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer);

bool is_non_english(std::string_view text, const CorpusConfig& config);

struct FilterStats {
  std::uint64_t input = 0;
  std::uint64_t kept = 0;
  std::array<std::uint64_t, kRejectReasonCount> rejected{};

  std::uint64_t rejected_total() const noexcept;
  std::uint64_t count(RejectReason reason) const noexcept {
    return rejected[static_cast<std::size_t>(reason)];
  }
  nlohmann::ordered_json to_json() const;
};

// ---- export readers -------------------------------------------------------

struct ReadResult {
  std::optional<RawExportRow> row;  // empty when the row could not be decoded
  std::string error;
};

class RowReader {
 public:
  virtual ~RowReader() = default;
  /// nullopt at end of input.
  virtual std::optional<ReadResult> next() = 0;
};

/// RFC 4180 CSV with a header naming AuthorID, Author, Date, Content,
/// Attachments (or Attachment) and Reactions in any order. Date may be epoch
/// seconds or ISO-8601.
class CsvRowReader final : public RowReader {
 public:
  explicit CsvRowReader(std::istream& in);
  std::optional<ReadResult> next() override;

 private:
  std::optional<std::vector<std::string>> read_record();

  std::istream& in_;
  std::vector<int> column_of_;  // field index per RawExportRow member, -1 if absent
  std::size_t header_width_ = 0;
};

/// One JSON object per line with the same keys as the CSV header
/// (case-insensitive).
class JsonlRowReader final : public RowReader {
 public:
  explicit JsonlRowReader(std::istream& in);
  std::optional<ReadResult> next() override;

 private:
  std::istream& in_;
};

/// Streams every row through the parser; each row is counted exactly once in
/// the returned stats. Row ids are the 0-based input positions.
FilterStats clean_corpus(RowReader& rows, const RowParser& parser,
                         const std::function<void(const PromptRecord&)>& sink);

// ---- record JSONL ---------------------------------------------------------

nlohmann::ordered_json record_to_json(const PromptRecord& record);
PromptRecord record_from_json(const nlohmann::json& j);

/// Reads a JSONL file of records. Throws Error(kParse) naming the line.
std::vector<PromptRecord> read_records(std::istream& in);

}  // namespace promptrecon::corpus
