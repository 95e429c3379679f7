// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/bank.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "binary_io.hpp"
#include "promptrecon/error.hpp"
#include "promptrecon/simd.hpp"
#include "text_util.hpp"

namespace promptrecon::bank {

std::string_view to_string(Side side) noexcept { return side == Side::kText ? "text" : "image"; }

std::optional<Side> side_from_string(std::string_view text) noexcept {
  if (text == "text") return Side::kText;
  if (text == "image") return Side::kImage;
  return std::nullopt;
}

namespace {

double self_norm(std::span<const float> v) {
  return std::sqrt(static_cast<double>(simd::dot(v, v)));
}

// Shared by cosine() and knn() so both produce the same bits.
double scaled(float dot, double na, double nb) {
  return std::clamp(static_cast<double>(dot) / (na * nb), -1.0, 1.0);
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimMismatch,
                "cosine of vectors with dims " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  const double na = self_norm(a);
  const double nb = self_norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroVector, "cosine of a zero vector");
  return scaled(simd::dot(a, b), na, nb);
}

void normalize(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq == 0.0) throw Error(ErrorCode::kZeroVector, "cannot normalize a zero vector");
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
}

EmbeddingBank::EmbeddingBank(std::uint32_t dim, std::vector<std::uint64_t> ids, std::vector<float> text_vecs,
                             std::vector<float> image_vecs, std::vector<std::string> prompts)
    : dim_(dim), ids_(std::move(ids)), text_(std::move(text_vecs)), image_(std::move(image_vecs)),
      prompts_(std::move(prompts)) {
  const std::size_t n = ids_.size();
  if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "bank dim must be positive");
  if (text_.size() != n * dim_ || image_.size() != n * dim_ || prompts_.size() != n) {
    throw Error(ErrorCode::kDimMismatch, "bank arrays disagree with count " + std::to_string(n));
  }
  text_norms_.resize(n);
  image_norms_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    text_norms_[i] = self_norm(row(Side::kText, i));
    image_norms_[i] = self_norm(row(Side::kImage, i));
    for (double nrm : {text_norms_[i], image_norms_[i]}) {
      if (!(std::abs(nrm - 1.0) <= kNormTolerance)) {
        throw Error(ErrorCode::kNotNormalized,
                    "record " + std::to_string(ids_[i]) + " has a vector of norm " + std::to_string(nrm));
      }
    }
  }
  build_index();
}

EmbeddingBank EmbeddingBank::from_raw(std::uint32_t dim, std::vector<std::uint64_t> ids,
                                      std::vector<float> text_vecs, std::vector<float> image_vecs,
                                      std::vector<std::string> prompts) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "bank dim must be positive");
  for (auto* m : {&text_vecs, &image_vecs}) {
    if (m->size() % dim != 0) throw Error(ErrorCode::kDimMismatch, "matrix size is not a multiple of dim");
    for (std::size_t off = 0; off < m->size(); off += dim) normalize(std::span<float>(m->data() + off, dim));
  }
  return EmbeddingBank(dim, std::move(ids), std::move(text_vecs), std::move(image_vecs), std::move(prompts));
}

void EmbeddingBank::build_index() {
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], i);
}

std::optional<std::size_t> EmbeddingBank::index_of(std::uint64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Neighbor> knn(const EmbeddingBank& bank, std::span<const float> query, std::size_t k, Side side) {
  if (bank.empty()) throw Error(ErrorCode::kEmptyBank, "knn on an empty bank");
  if (k < 1 || k > bank.count()) {
    throw Error(ErrorCode::kBadK, "k=" + std::to_string(k) + " outside [1," + std::to_string(bank.count()) + "]");
  }
  if (query.size() != bank.dim()) {
    throw Error(ErrorCode::kDimMismatch, "query dim " + std::to_string(query.size()) + " != bank dim " +
                                             std::to_string(bank.dim()));
  }
  const double qn = self_norm(query);
  if (qn == 0.0) throw Error(ErrorCode::kZeroVector, "knn query is a zero vector");

  std::vector<float> dots(bank.count());
  simd::matvec(bank.matrix(side), bank.count(), query, dots);

  struct Scored {
    double sim;
    std::uint64_t id;
    std::size_t row;
  };
  std::vector<Scored> scored(bank.count());
  for (std::size_t i = 0; i < bank.count(); ++i) {
    scored[i] = {scaled(dots[i], qn, bank.norm(side, i)), bank.ids()[i], i};
  }
  auto better = [](const Scored& a, const Scored& b) { return a.sim != b.sim ? a.sim > b.sim : a.id < b.id; };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);

  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({scored[i].id, scored[i].sim, bank.prompts()[scored[i].row]});
  return out;
}

// ---- persistence ----------------------------------------------------------

namespace {

std::uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  while (!bytes.empty()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size(), 1U << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), n);
    bytes.remove_prefix(n);
  }
  return static_cast<std::uint32_t>(crc);
}

std::string slurp(std::istream& in) {
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

void save_bank(const EmbeddingBank& bank, std::ostream& out) {
  binary::Writer w;
  w.put_bytes(std::string_view(kBankMagic, 4));
  w.put(kBankFormatVersion);
  w.put(bank.dim());
  w.put(static_cast<std::uint64_t>(bank.count()));
  for (std::size_t i = 0; i < bank.count(); ++i) {
    w.put(bank.ids()[i]);
    w.put_floats(bank.row(Side::kText, i));
    w.put_floats(bank.row(Side::kImage, i));
    const auto& p = bank.prompts()[i];
    w.put(static_cast<std::uint32_t>(p.size()));
    w.put_bytes(p);
  }
  w.put(crc_of(w.buffer()));
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw Error(ErrorCode::kIo, "failed writing bank");
}

void save_bank(const EmbeddingBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  save_bank(bank, out);
}

EmbeddingBank load_bank(std::istream& in) {
  const std::string data = slurp(in);
  binary::Reader r(data);
  if (data.size() >= 4 && std::string_view(data).substr(0, 4) != std::string_view(kBankMagic, 4)) {
    throw Error(ErrorCode::kBadMagic, "not an EBNK bank file");
  }
  r.get_bytes(4);
  const auto version = r.get<std::uint16_t>();
  if (version != kBankFormatVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "bank format version " + std::to_string(version));
  }
  const auto dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  if (dim == 0) throw Error(ErrorCode::kParse, "bank header has dim 0");
  // Each record needs at least 12 + 8*dim bytes; reject impossible counts
  // before allocating.
  const std::uint64_t min_record = 12 + 8ULL * dim;
  if (count > r.remaining() / min_record) {
    throw Error(ErrorCode::kTruncatedFile, "bank header claims " + std::to_string(count) + " records");
  }

  std::vector<std::uint64_t> ids(count);
  std::vector<float> text(count * dim);
  std::vector<float> image(count * dim);
  std::vector<std::string> prompts(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    ids[i] = r.get<std::uint64_t>();
    r.get_floats(text.data() + i * dim, dim);
    r.get_floats(image.data() + i * dim, dim);
    const auto len = r.get<std::uint32_t>();
    prompts[i] = std::string(r.get_bytes(len));
  }
  const std::size_t body_end = r.position();
  const auto stored = r.get<std::uint32_t>();
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kTrailingData, std::to_string(r.remaining()) + " bytes after the checksum");
  }
  if (crc_of(std::string_view(data).substr(0, body_end)) != stored) {
    throw Error(ErrorCode::kChecksumMismatch, "bank checksum mismatch");
  }
  return EmbeddingBank(dim, std::move(ids), std::move(text), std::move(image), std::move(prompts));
}

EmbeddingBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open bank " + path.string());
  try {
    return load_bank(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

EmbeddingBank bank_from_jsonl(std::istream& in) {
  std::vector<std::uint64_t> ids;
  std::vector<float> text;
  std::vector<float> image;
  std::vector<std::string> prompts;
  std::uint32_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto t = j.at("text").get<std::vector<float>>();
      const auto im = j.at("image").get<std::vector<float>>();
      if (dim == 0) dim = static_cast<std::uint32_t>(t.size());
      if (t.size() != dim || im.size() != dim || dim == 0) {
        throw Error(ErrorCode::kDimMismatch, "line " + std::to_string(line_no) + ": vector dims differ");
      }
      ids.push_back(j.at("id").get<std::uint64_t>());
      prompts.push_back(j.at("prompt").get<std::string>());
      text.insert(text.end(), t.begin(), t.end());
      image.insert(image.end(), im.begin(), im.end());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "embedded line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (ids.empty()) throw Error(ErrorCode::kEmptyBank, "no embedded rows");
  return EmbeddingBank::from_raw(dim, std::move(ids), std::move(text), std::move(image), std::move(prompts));
}

void write_vectors(std::ostream& out, std::uint32_t dim, std::span<const float> data) {
  if (dim == 0 || data.size() % dim != 0) throw Error(ErrorCode::kDimMismatch, "vector data not a multiple of dim");
  binary::Writer w;
  w.put(static_cast<std::uint32_t>(data.size() / dim));
  w.put(dim);
  w.put_floats(data);
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw Error(ErrorCode::kIo, "failed writing vectors");
}

std::vector<std::vector<float>> read_vectors(std::istream& in) {
  const std::string data = slurp(in);
  binary::Reader r(data);
  const auto count = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  if (dim == 0) throw Error(ErrorCode::kParse, "vector file has dim 0");
  if (r.remaining() != static_cast<std::uint64_t>(count) * dim * sizeof(float)) {
    throw Error(r.remaining() < static_cast<std::uint64_t>(count) * dim * sizeof(float) ? ErrorCode::kTruncatedFile
                                                                                         : ErrorCode::kTrailingData,
                "vector file size disagrees with its header");
  }
  std::vector<std::vector<float>> out(count, std::vector<float>(dim));
  for (auto& v : out) r.get_floats(v.data(), dim);
  return out;
}

std::vector<std::vector<float>> read_vectors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open vector file " + path.string());
  return read_vectors(in);
}

// ---- retrieval accuracy ---------------------------------------------------

std::map<std::size_t, double> eval_topk_accuracy(const EmbeddingBank& bank, std::span<const EvalPair> pairs,
                                                 std::span<const std::size_t> ks) {
  if (pairs.empty()) throw Error(ErrorCode::kNoEvalSamples, "no evaluation pairs");
  if (ks.empty()) throw Error(ErrorCode::kBadK, "no k values requested");
  if (bank.empty()) throw Error(ErrorCode::kEmptyBank, "evaluation on an empty bank");
  std::size_t k_max = 0;
  for (std::size_t k : ks) {
    if (k < 1 || k > bank.count()) throw Error(ErrorCode::kBadK, "k=" + std::to_string(k) + " out of range");
    k_max = std::max(k_max, k);
  }
  for (const auto& p : pairs) {
    if (!bank.index_of(p.truth_id)) {
      throw Error(ErrorCode::kMissingGroundTruth, "ground-truth id " + std::to_string(p.truth_id) + " not in bank");
    }
  }
  // rank_hits[r] counts pairs whose truth sits at 0-based rank r.
  std::vector<std::uint64_t> rank_hits(k_max, 0);
  for (const auto& p : pairs) {
    const auto nn = knn(bank, p.image, k_max, Side::kText);
    for (std::size_t r = 0; r < nn.size(); ++r) {
      if (nn[r].id == p.truth_id) {
        ++rank_hits[r];
        break;
      }
    }
  }
  std::map<std::size_t, double> acc;
  for (std::size_t k : ks) {
    std::uint64_t hits = 0;
    for (std::size_t r = 0; r < k; ++r) hits += rank_hits[r];
    acc[k] = static_cast<double>(hits) / static_cast<double>(pairs.size());
  }
  return acc;
}

std::string render_accuracy_header(const std::map<std::size_t, double>& acc) {
  std::string title = "| Model |";
  std::string rule = "|---|";
  for (const auto& [k, _] : acc) {
    title += " Top-" + std::to_string(k) + " Accuracy |";
    rule += "---|";
  }
  return title + "\n" + rule;
}

std::string render_accuracy_row(std::string_view label, const std::map<std::size_t, double>& acc) {
  std::string out = "| " + std::string(label) + " |";
  for (const auto& [k, v] : acc) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " %.4f |", v);
    out += buf;
  }
  return out;
}

}  // namespace promptrecon::bank
