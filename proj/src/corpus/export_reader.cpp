// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <istream>

#include "promptrecon/corpus.hpp"
#include "promptrecon/error.hpp"
#include "text_util.hpp"

namespace promptrecon::corpus {
namespace {

enum Column { kAuthorId, kAuthor, kDate, kContent, kAttachment, kReactions, kColumnCount };

int column_for(std::string_view header) {
  const std::string h = text::to_lower(text::trim(header));
  if (h == "authorid") return kAuthorId;
  if (h == "author") return kAuthor;
  if (h == "date") return kDate;
  if (h == "content") return kContent;
  if (h == "attachments" || h == "attachment") return kAttachment;
  if (h == "reactions") return kReactions;
  return -1;
}

std::optional<std::int64_t> parse_date(std::string_view raw) {
  raw = text::trim(raw);
  if (raw.empty()) return std::nullopt;
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
  if (ec == std::errc() && ptr == raw.data() + raw.size()) return value;
  return iso_to_epoch(raw);
}

}  // namespace

CsvRowReader::CsvRowReader(std::istream& in) : in_(in), column_of_(kColumnCount, -1) {
  auto header = read_record();
  if (!header) throw Error(ErrorCode::kParse, "CSV input has no header row");
  // Strip a UTF-8 byte-order mark from the first header cell.
  if (!header->empty() && (*header)[0].rfind("\xEF\xBB\xBF", 0) == 0) {
    (*header)[0].erase(0, 3);
  }
  header_width_ = header->size();
  for (std::size_t i = 0; i < header->size(); ++i) {
    const int col = column_for((*header)[i]);
    if (col >= 0 && column_of_[col] < 0) column_of_[col] = static_cast<int>(i);
  }
  if (column_of_[kContent] < 0 || column_of_[kDate] < 0) {
    throw Error(ErrorCode::kParse, "CSV header must name Date and Content columns");
  }
}

std::optional<std::vector<std::string>> CsvRowReader::read_record() {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c = 0;
  while (in_.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in_.peek() == '"') {
          in_.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(std::move(field));
      return fields;
    } else {
      field.push_back(c);
    }
  }
  if (!any) return std::nullopt;
  if (!field.empty() && field.back() == '\r') field.pop_back();
  fields.push_back(std::move(field));
  return fields;
}

std::optional<ReadResult> CsvRowReader::next() {
  while (true) {
    auto fields = read_record();
    if (!fields) return std::nullopt;
    // Blank physical lines are not rows.
    if (fields->size() == 1 && text::trim((*fields)[0]).empty()) continue;
    if (fields->size() != header_width_) {
      return ReadResult{std::nullopt, "expected " + std::to_string(header_width_) + " fields, got " +
                                          std::to_string(fields->size())};
    }
    auto get = [&](int col) -> std::string {
      return column_of_[col] < 0 ? std::string() : (*fields)[column_of_[col]];
    };
    const auto date = parse_date(get(kDate));
    if (!date) return ReadResult{std::nullopt, "unparseable Date field: " + get(kDate)};
    RawExportRow row{get(kAuthorId), get(kAuthor), *date, get(kContent), get(kAttachment),
                     get(kReactions)};
    return ReadResult{std::move(row), {}};
  }
}

JsonlRowReader::JsonlRowReader(std::istream& in) : in_(in) {}

std::optional<ReadResult> JsonlRowReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      return ReadResult{std::nullopt, e.what()};
    }
    if (!j.is_object()) return ReadResult{std::nullopt, "row is not an object"};
    RawExportRow row;
    bool have_date = false;
    bool have_content = false;
    for (const auto& [key, value] : j.items()) {
      const int col = column_for(key);
      if (col < 0) continue;
      auto as_text = [&value]() -> std::string {
        if (value.is_string()) return value.get<std::string>();
        if (value.is_null()) return {};
        return value.dump();
      };
      switch (col) {
        case kAuthorId: row.author_id = as_text(); break;
        case kAuthor: row.author = as_text(); break;
        case kDate: {
          std::optional<std::int64_t> date;
          if (value.is_number_integer()) date = value.get<std::int64_t>();
          else if (value.is_string()) date = parse_date(value.get<std::string>());
          if (!date) return ReadResult{std::nullopt, "unparseable Date field: " + value.dump()};
          row.date = *date;
          have_date = true;
          break;
        }
        case kContent:
          row.content = as_text();
          have_content = true;
          break;
        case kAttachment: row.attachment = as_text(); break;
        case kReactions: row.reactions = as_text(); break;
        default: break;
      }
    }
    if (!have_date || !have_content) {
      return ReadResult{std::nullopt, "row lacks Date or Content"};
    }
    return ReadResult{std::move(row), {}};
  }
  return std::nullopt;
}

}  // namespace promptrecon::corpus
