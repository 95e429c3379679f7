// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Dual text/image embedding store with exact cosine kNN.
//
// Rows are stored L2-normalized. Scoring runs the dispatched matvec over the
// whole side matrix, so a neighbor's similarity is bit-identical to cosine()
// on the same pair.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace promptrecon::bank {

inline constexpr char kBankMagic[4] = {'E', 'B', 'N', 'K'};
inline constexpr std::uint16_t kBankFormatVersion = 1;
inline constexpr float kNormTolerance = 1e-4F;

enum class Side { kText, kImage };

std::string_view to_string(Side side) noexcept;
std::optional<Side> side_from_string(std::string_view text) noexcept;

/// Throws Error(kDimMismatch) or Error(kZeroVector).
double cosine(std::span<const float> a, std::span<const float> b);

/// In place; throws Error(kZeroVector) for an all-zero vector.
void normalize(std::span<float> v);

struct Neighbor {
  std::uint64_t id = 0;
  double similarity = 0.0;
  std::string prompt;
};

class EmbeddingBank {
 public:
  EmbeddingBank() = default;

  /// Vectors must already be unit-length (within kNormTolerance); throws
  /// Error(kNotNormalized) naming the offending row otherwise.
  EmbeddingBank(std::uint32_t dim, std::vector<std::uint64_t> ids, std::vector<float> text_vecs,
                std::vector<float> image_vecs, std::vector<std::string> prompts);

  /// Normalizes every row first.
  static EmbeddingBank from_raw(std::uint32_t dim, std::vector<std::uint64_t> ids,
                                std::vector<float> text_vecs, std::vector<float> image_vecs,
                                std::vector<std::string> prompts);

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  const std::vector<std::uint64_t>& ids() const noexcept { return ids_; }
  const std::vector<std::string>& prompts() const noexcept { return prompts_; }
  std::span<const float> matrix(Side side) const noexcept {
    return side == Side::kText ? std::span<const float>(text_) : std::span<const float>(image_);
  }
  std::span<const float> row(Side side, std::size_t i) const noexcept {
    return matrix(side).subspan(i * dim_, dim_);
  }
  /// sqrt of the row's self dot product, as cosine() computes it.
  double norm(Side side, std::size_t i) const noexcept {
    return (side == Side::kText ? text_norms_ : image_norms_)[i];
  }

  std::optional<std::size_t> index_of(std::uint64_t id) const;

 private:
  void build_index();

  std::uint32_t dim_ = 0;
  std::vector<std::uint64_t> ids_;
  std::vector<float> text_;
  std::vector<float> image_;
  std::vector<std::string> prompts_;
  std::vector<double> text_norms_;
  std::vector<double> image_norms_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Exact top-k by cosine, similarity descending, ties by ascending id.
/// Throws Error(kEmptyBank), Error(kBadK) or Error(kDimMismatch).
std::vector<Neighbor> knn(const EmbeddingBank& bank, std::span<const float> query, std::size_t k,
                          Side side);

// ---- persistence ----------------------------------------------------------

void save_bank(const EmbeddingBank& bank, std::ostream& out);
void save_bank(const EmbeddingBank& bank, const std::filesystem::path& path);

/// Errors: kBadMagic, kVersionUnsupported, kTruncatedFile, kChecksumMismatch,
/// kTrailingData, kNotNormalized. kIo when the file cannot be opened.
EmbeddingBank load_bank(std::istream& in);
EmbeddingBank load_bank(const std::filesystem::path& path);

/// Builds a bank from JSONL rows {id, prompt, text:[f], image:[f]}, normalizing
/// each vector. Throws Error(kParse) naming the line.
EmbeddingBank bank_from_jsonl(std::istream& in);

/// Target-vector files: count u32 | dim u32 | count*dim f32, little-endian,
/// no magic.
void write_vectors(std::ostream& out, std::uint32_t dim, std::span<const float> data);
std::vector<std::vector<float>> read_vectors(std::istream& in);
std::vector<std::vector<float>> read_vectors(const std::filesystem::path& path);

// ---- retrieval accuracy ---------------------------------------------------

struct EvalPair {
  std::vector<float> image;
  std::uint64_t truth_id = 0;
};

/// accuracy(k) = share of pairs whose truth id is among knn(image, k, text).
/// Errors: kMissingGroundTruth, kNoEvalSamples, kBadK.
std::map<std::size_t, double> eval_topk_accuracy(const EmbeddingBank& bank,
                                                 std::span<const EvalPair> pairs,
                                                 std::span<const std::size_t> ks);

/// Markdown table row "| <label> | 0.9167 | 0.9762 | 0.9857 |", 4 decimals,
/// ascending k. render_accuracy_header() gives the matching title and rule
/// lines.
std::string render_accuracy_row(std::string_view label, const std::map<std::size_t, double>& acc);
std::string render_accuracy_header(const std::map<std::size_t, double>& acc);

// ---- keywords and named entities ------------------------------------------

/// Document frequencies of keyword terms over a prompt collection.
struct CorpusStats {
  std::uint64_t documents = 0;
  std::unordered_map<std::string, std::uint64_t> document_frequency;

  static CorpusStats from_prompts(std::span<const std::string> prompts);
  void add(std::string_view prompt);
};

/// Lowercased keyword terms: runs of letters and digits (bytes >= 0x80 count
/// as letters), at least two bytes long, stop-words removed.
std::vector<std::string> keyword_terms(std::string_view prompt);

/// Capitalized word runs that do not begin a segment (segments split on
/// , . ; : ! ? and |). A possessive "'s" is stripped and ends the run. Each distinct entity is returned once, in order of first
/// appearance.
std::vector<std::string> named_entities(std::string_view prompt);

struct KeywordReport {
  std::vector<std::pair<std::string, double>> keywords;
  std::vector<std::string> named_entities;

  nlohmann::ordered_json to_json() const;
};

/// Keywords scored by (occurrences across neighbor prompts) *
/// log(documents / max(df, 1)), descending with ties by term. Entities ranked
/// by the number of neighbor prompts mentioning them, ties by text. Each list
/// is cut at `m` entries. Throws Error(kInvalidArgument) for no neighbors.
KeywordReport extract_keywords_and_entities(std::span<const Neighbor> neighbors,
                                            const CorpusStats& stats, std::size_t m);

}  // namespace promptrecon::bank
