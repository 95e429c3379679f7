// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/bank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "promptrecon/error.hpp"

namespace promptrecon::bank {
namespace {

const std::filesystem::path kFixtures = std::filesystem::path(PROMPTRECON_TEST_DATA_DIR) / "fixtures";

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::kInvalidArgument;
}

std::vector<float> random_vec(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> g(0.0F, 1.0F);
  std::vector<float> v(dim);
  for (auto& x : v) x = g(rng);
  return v;
}

EmbeddingBank random_bank(std::mt19937_64& rng, std::size_t n, std::uint32_t dim) {
  std::vector<std::uint64_t> ids(n);
  std::vector<float> text;
  std::vector<float> image;
  std::vector<std::string> prompts;
  // Shuffled, non-contiguous ids so tie order is not row order.
  for (std::size_t i = 0; i < n; ++i) ids[i] = 7 * i + 3;
  std::shuffle(ids.begin(), ids.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    auto t = random_vec(rng, dim);
    auto im = random_vec(rng, dim);
    text.insert(text.end(), t.begin(), t.end());
    image.insert(image.end(), im.begin(), im.end());
    prompts.push_back("prompt " + std::to_string(ids[i]));
  }
  return EmbeddingBank::from_raw(dim, ids, text, image, prompts);
}

// Full sort over every entry, scoring with cosine().
std::vector<Neighbor> brute_force(const EmbeddingBank& bank, std::span<const float> q, std::size_t k, Side side) {
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < bank.count(); ++i) {
    all.push_back({bank.ids()[i], cosine(q, bank.row(side, i)), bank.prompts()[i]});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
  });
  all.resize(k);
  return all;
}

TEST(CosineTest, Examples) {
  EXPECT_EQ(cosine(std::vector<float>{1, 0}, std::vector<float>{1, 0}), 1.0);
  EXPECT_EQ(cosine(std::vector<float>{1, 0}, std::vector<float>{0, 1}), 0.0);
  EXPECT_NEAR(cosine(std::vector<float>{1, 2, 2}, std::vector<float>{2, 1, 2}), 8.0 / 9.0, 1e-7);
  EXPECT_EQ(code_of([] { cosine(std::vector<float>{1, 0}, std::vector<float>{1}); }), ErrorCode::kDimMismatch);
  EXPECT_EQ(code_of([] { cosine(std::vector<float>{0, 0}, std::vector<float>{1, 0}); }), ErrorCode::kZeroVector);
}

TEST(CosineTest, SymmetricAndBoundedAgainstLongDouble) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 500; ++t) {
    const std::size_t dim = 1 + rng() % 100;
    const auto a = random_vec(rng, dim);
    const auto b = random_vec(rng, dim);
    const double ab = cosine(a, b);
    EXPECT_NEAR(ab, cosine(b, a), 1e-7);
    EXPECT_GE(ab, -1.0);
    EXPECT_LE(ab, 1.0);
    long double d = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      d += static_cast<long double>(a[i]) * b[i];
      na += static_cast<long double>(a[i]) * a[i];
      nb += static_cast<long double>(b[i]) * b[i];
    }
    EXPECT_NEAR(ab, static_cast<double>(d / std::sqrt(na * nb)), 1e-5);
  }
}

TEST(CosineTest, ParallelVectorsClampToOne) {
  std::vector<float> a = {0.1F, 0.2F, 0.3F};
  EXPECT_LE(cosine(a, a), 1.0);
  EXPECT_NEAR(cosine(a, a), 1.0, 1e-7);
}

TEST(KnnTest, SingleEntry) {
  const auto bank = EmbeddingBank::from_raw(3, {42}, {1, 2, 3}, {3, 2, 1}, {"only"});
  const std::vector<float> q(bank.row(Side::kText, 0).begin(), bank.row(Side::kText, 0).end());
  const auto nn = knn(bank, q, 1, Side::kText);
  ASSERT_EQ(nn.size(), 1u);
  EXPECT_EQ(nn[0].id, 42u);
  EXPECT_DOUBLE_EQ(nn[0].similarity, 1.0);
  EXPECT_EQ(nn[0].prompt, "only");
}

TEST(KnnTest, Errors) {
  std::mt19937_64 rng(1);
  const auto bank = random_bank(rng, 5, 4);
  const std::vector<float> q = {1, 0, 0, 0};
  EXPECT_EQ(code_of([&] { knn(EmbeddingBank{}, q, 1, Side::kText); }), ErrorCode::kEmptyBank);
  EXPECT_EQ(code_of([&] { knn(bank, q, 0, Side::kText); }), ErrorCode::kBadK);
  EXPECT_EQ(code_of([&] { knn(bank, q, 6, Side::kText); }), ErrorCode::kBadK);
  EXPECT_EQ(code_of([&] { knn(bank, std::vector<float>{1, 0}, 1, Side::kText); }), ErrorCode::kDimMismatch);
}

TEST(KnnTest, FiveVectorsMatchBruteForce) {
  std::mt19937_64 rng(2);
  const auto bank = random_bank(rng, 5, 6);
  const auto q = random_vec(rng, 6);
  const auto got = knn(bank, q, 3, Side::kImage);
  const auto want = brute_force(bank, q, 3, Side::kImage);
  ASSERT_EQ(got.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(got[i].id, want[i].id);
    EXPECT_EQ(got[i].similarity, want[i].similarity);
  }
}

TEST(KnnTest, FullKIsPermutation) {
  std::mt19937_64 rng(3);
  const auto bank = random_bank(rng, 40, 8);
  const auto nn = knn(bank, random_vec(rng, 8), 40, Side::kText);
  std::vector<std::uint64_t> ids;
  for (std::size_t i = 0; i < nn.size(); ++i) {
    ids.push_back(nn[i].id);
    if (i > 0) EXPECT_GE(nn[i - 1].similarity, nn[i].similarity);
  }
  std::sort(ids.begin(), ids.end());
  auto expected = bank.ids();
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(ids, expected);
}

TEST(KnnTest, TiesBreakByAscendingId) {
  // Three identical text vectors under ids 9, 2, 5.
  const auto bank = EmbeddingBank::from_raw(2, {9, 2, 5}, {1, 1, 1, 1, 1, 1}, {1, 0, 1, 0, 1, 0}, {"a", "b", "c"});
  const auto nn = knn(bank, std::vector<float>{1, 1}, 3, Side::kText);
  EXPECT_EQ(nn[0].id, 2u);
  EXPECT_EQ(nn[1].id, 5u);
  EXPECT_EQ(nn[2].id, 9u);
}

TEST(KnnTest, OracleEquivalenceOnRandomBanks) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 1 + rng() % 300;
    const auto dim = static_cast<std::uint32_t>(1 + rng() % 64);
    const auto bank = random_bank(rng, n, dim);
    const auto q = random_vec(rng, dim);
    for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}, n}) {
      if (k > n) continue;
      const auto got = knn(bank, q, k, Side::kText);
      const auto want = brute_force(bank, q, k, Side::kText);
      for (std::size_t i = 0; i < k; ++i) {
        ASSERT_EQ(got[i].id, want[i].id) << "trial " << t << " k " << k << " rank " << i;
        ASSERT_EQ(got[i].similarity, want[i].similarity);
      }
    }
  }
}

TEST(BankTest, RejectsUnnormalizedVectors) {
  EXPECT_EQ(code_of([] { EmbeddingBank(2, {1}, {1, 1}, {1, 0}, {"x"}); }), ErrorCode::kNotNormalized);
  EXPECT_EQ(code_of([] { EmbeddingBank(2, {1}, {1, 0}, {1, 0}, {}); }), ErrorCode::kDimMismatch);
}

std::string serialize(const EmbeddingBank& bank) {
  std::ostringstream out;
  save_bank(bank, out);
  return out.str();
}

EmbeddingBank deserialize(const std::string& bytes) {
  std::istringstream in(bytes);
  return load_bank(in);
}

TEST(PersistenceTest, RoundTripIsBitExact) {
  std::mt19937_64 rng(5);
  const auto bank = random_bank(rng, 3, 5);
  const auto back = deserialize(serialize(bank));
  EXPECT_EQ(back.dim(), bank.dim());
  EXPECT_EQ(back.ids(), bank.ids());
  EXPECT_EQ(back.prompts(), bank.prompts());
  for (auto side : {Side::kText, Side::kImage}) {
    ASSERT_EQ(back.matrix(side).size(), bank.matrix(side).size());
    EXPECT_EQ(std::memcmp(back.matrix(side).data(), bank.matrix(side).data(), bank.matrix(side).size_bytes()), 0);
  }
  EXPECT_EQ(serialize(back), serialize(bank));
}

TEST(PersistenceTest, LayoutArithmetic) {
  const auto bank = EmbeddingBank::from_raw(2, {1, 2}, {1, 0, 0, 1}, {0, 1, 1, 0}, {"ab", "c\xC3\xA7"});
  const auto bytes = serialize(bank);
  // header 18, per record 8 + 2*2*4 + 4 + len, crc 4.
  EXPECT_EQ(bytes.size(), 18u + (28 + 2) + (28 + 3) + 4);
  EXPECT_EQ(bytes.substr(0, 4), "EBNK");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
}

TEST(PersistenceTest, CorruptionErrors) {
  std::mt19937_64 rng(6);
  const auto good = serialize(random_bank(rng, 4, 3));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of([&] { deserialize(bad_magic); }), ErrorCode::kBadMagic);

  auto bad_version = good;
  bad_version[4] = 2;
  EXPECT_EQ(code_of([&] { deserialize(bad_version); }), ErrorCode::kVersionUnsupported);

  EXPECT_EQ(code_of([&] { deserialize(good.substr(0, 18 + 20)); }), ErrorCode::kTruncatedFile);
  EXPECT_EQ(code_of([&] { deserialize(good.substr(0, good.size() - 2)); }), ErrorCode::kTruncatedFile);
  EXPECT_EQ(code_of([&] { deserialize(good + "x"); }), ErrorCode::kTrailingData);

  auto flipped_prompt = good;
  flipped_prompt[good.size() - 6] ^= 0x01;
  EXPECT_EQ(code_of([&] { deserialize(flipped_prompt); }), ErrorCode::kChecksumMismatch);
}

TEST(PersistenceTest, EveryFlippedByteIsDetected) {
  std::mt19937_64 rng(7);
  const auto good = serialize(random_bank(rng, 3, 4));
  for (std::size_t i = 0; i < good.size(); ++i) {
    for (unsigned char mask : {0x01, 0x80}) {
      auto bad = good;
      bad[i] = static_cast<char>(bad[i] ^ mask);
      EXPECT_THROW(deserialize(bad), Error) << "byte " << i;
    }
  }
}

TEST(PersistenceTest, PythonFixtureLoads) {
  const auto bank = load_bank(kFixtures / "fixture_bank.ebnk");
  EXPECT_EQ(bank.count(), 10u);
  EXPECT_EQ(bank.dim(), 8u);
  EXPECT_EQ(bank.ids().front(), 1000u);
  EXPECT_EQ(bank.prompts()[1], "portrait of Awkwafina in the rain, cinematic lighting");
  EXPECT_EQ(serialize(bank), [&] {
    std::ifstream in(kFixtures / "fixture_bank.ebnk", std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }());

  const auto targets = read_vectors(kFixtures / "fixture_targets.vec");
  ASSERT_EQ(targets.size(), 10u);
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < targets.size(); ++i) pairs.push_back({targets[i], 1000 + i});
  const std::vector<std::size_t> ks = {1};
  EXPECT_EQ(eval_topk_accuracy(bank, pairs, ks).at(1), 1.0);
}

TEST(PersistenceTest, MissingFileIsIoError) {
  EXPECT_EQ(code_of([] { load_bank(std::filesystem::path("/nonexistent/bank.ebnk")); }), ErrorCode::kIo);
}

TEST(VectorsTest, RoundTripAndSize) {
  const std::vector<float> data = {1, 2, 3, 4, 5, 6};
  std::ostringstream out;
  write_vectors(out, 3, data);
  EXPECT_EQ(out.str().size(), 4u + 4u + 6 * 4u);
  std::istringstream in(out.str());
  const auto back = read_vectors(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1], (std::vector<float>{4, 5, 6}));
  std::istringstream cut(out.str().substr(0, 20));
  EXPECT_EQ(code_of([&] { read_vectors(cut); }), ErrorCode::kTruncatedFile);
}

TEST(BankFromJsonlTest, NormalizesRows) {
  std::istringstream in(R"({"id":5,"prompt":"p","text":[3,4],"image":[0,2]})"
                        "\n"
                        R"({"id":6,"prompt":"q","text":[1,0],"image":[0,1]})");
  const auto bank = bank_from_jsonl(in);
  EXPECT_EQ(bank.count(), 2u);
  EXPECT_FLOAT_EQ(bank.row(Side::kText, 0)[0], 0.6F);
  EXPECT_FLOAT_EQ(bank.row(Side::kImage, 0)[1], 1.0F);
  std::istringstream bad(R"({"id":5,"prompt":"p","text":[3,4],"image":[0]})");
  EXPECT_EQ(code_of([&] { bank_from_jsonl(bad); }), ErrorCode::kDimMismatch);
}

// ---- accuracy -------------------------------------------------------------

TEST(AccuracyTest, SelfRetrievalIsPerfect) {
  std::mt19937_64 rng(8);
  const auto bank = random_bank(rng, 60, 16);
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < bank.count(); ++i) {
    auto t = bank.row(Side::kText, i);
    pairs.push_back({{t.begin(), t.end()}, bank.ids()[i]});
  }
  const std::vector<std::size_t> ks = {1, 5, 10};
  const auto acc = eval_topk_accuracy(bank, pairs, ks);
  EXPECT_EQ(acc.at(1), 1.0);
  EXPECT_EQ(acc.at(10), 1.0);
}

TEST(AccuracyTest, MatchesIndependentRecount) {
  std::mt19937_64 rng(9);
  const auto bank = random_bank(rng, 80, 6);
  std::vector<EvalPair> pairs;
  std::normal_distribution<float> noise(0.0F, 0.8F);
  for (std::size_t i = 0; i < 50; ++i) {
    auto im = bank.row(Side::kImage, i);
    std::vector<float> q(im.begin(), im.end());
    for (auto& x : q) x += noise(rng);
    pairs.push_back({q, bank.ids()[i]});
  }
  const std::vector<std::size_t> ks = {1, 5, 10, 80};
  const auto acc = eval_topk_accuracy(bank, pairs, ks);
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (const auto& p : pairs) {
      // Rank = 1 + number of entries strictly ahead of the truth.
      const auto truth_row = *bank.index_of(p.truth_id);
      const double ts = cosine(p.image, bank.row(Side::kText, truth_row));
      std::size_t ahead = 0;
      for (std::size_t r = 0; r < bank.count(); ++r) {
        const double s = cosine(p.image, bank.row(Side::kText, r));
        if (s > ts || (s == ts && bank.ids()[r] < p.truth_id)) ++ahead;
      }
      hits += ahead < k;
    }
    EXPECT_DOUBLE_EQ(acc.at(k), static_cast<double>(hits) / 50.0) << "k=" << k;
  }
  EXPECT_LE(acc.at(1), acc.at(5));
  EXPECT_LE(acc.at(5), acc.at(10));
  EXPECT_EQ(acc.at(80), 1.0);
}

TEST(AccuracyTest, Errors) {
  std::mt19937_64 rng(10);
  const auto bank = random_bank(rng, 5, 3);
  const std::vector<std::size_t> ks = {1};
  const std::vector<EvalPair> missing = {{{1, 0, 0}, 999}};
  EXPECT_EQ(code_of([&] { eval_topk_accuracy(bank, missing, ks); }), ErrorCode::kMissingGroundTruth);
  EXPECT_EQ(code_of([&] { eval_topk_accuracy(bank, {}, ks); }), ErrorCode::kNoEvalSamples);
}

TEST(AccuracyTest, TableRowRendering) {
  const std::map<std::size_t, double> acc = {{1, 0.9167}, {5, 0.9762}, {10, 0.98571}};
  EXPECT_EQ(render_accuracy_row("Fine-tuned on 2M samples", acc),
            "| Fine-tuned on 2M samples | 0.9167 | 0.9762 | 0.9857 |");
  EXPECT_EQ(render_accuracy_header(acc),
            "| Model | Top-1 Accuracy | Top-5 Accuracy | Top-10 Accuracy |\n|---|---|---|---|");
}

// ---- keywords and entities ------------------------------------------------

std::vector<Neighbor> neighbors_of(const std::vector<std::string>& prompts) {
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < prompts.size(); ++i) out.push_back({i, 0.5, prompts[i]});
  return out;
}

TEST(EntityTest, Examples) {
  EXPECT_EQ(named_entities("water pouring on Awkwafina's head, photo"), (std::vector<std::string>{"Awkwafina"}));
  EXPECT_EQ(named_entities("Portrait of Tom Hanks, by Greg Rutkowski"),
            (std::vector<std::string>{"Tom Hanks", "Greg Rutkowski"}));
  // Capitalized only because it opens a segment.
  EXPECT_TRUE(named_entities("Castle at night. Moon above").empty());
  EXPECT_EQ(named_entities("painting by \xC3\x89" "douard Manet"), (std::vector<std::string>{"\xC3\x89" "douard Manet"}));
  EXPECT_EQ(named_entities("a cat and Totoro, with Totoro"), (std::vector<std::string>{"Totoro"}));
}

TEST(KeywordTest, TermsLowercasedWithoutStopWords) {
  EXPECT_EQ(keyword_terms("The Fox in a 4K forest, x"), (std::vector<std::string>{"fox", "4k", "forest"}));
}

TEST(KeywordTest, AwkwafinaAmongEntities) {
  const auto ns = neighbors_of({"a woman, water poured on Awkwafina's head", "portrait of Awkwafina smiling",
                                "Asian woman laughing"});
  const auto report = extract_keywords_and_entities(ns, CorpusStats::from_prompts(std::vector<std::string>{"x"}), 10);
  ASSERT_FALSE(report.named_entities.empty());
  EXPECT_EQ(report.named_entities.front(), "Awkwafina");
}

TEST(KeywordTest, RareTermOutranksCommonTerm) {
  // Toy corpus of 100 prompts: "detailed" in all of them, "zeppelin" in 3.
  std::vector<std::string> corpus(100, "detailed scene");
  for (int i = 0; i < 3; ++i) corpus[i] = "detailed zeppelin";
  const auto stats = CorpusStats::from_prompts(corpus);
  const auto ns = neighbors_of({"detailed zeppelin", "detailed zeppelin", "detailed zeppelin", "detailed", "detailed"});
  const auto report = extract_keywords_and_entities(ns, stats, 5);
  // zeppelin: 3 * ln(100/3); detailed: 5 * ln(100/100) = 0.
  ASSERT_EQ(report.keywords.size(), 2u);
  EXPECT_EQ(report.keywords[0].first, "zeppelin");
  EXPECT_NEAR(report.keywords[0].second, 3.0 * std::log(100.0 / 3.0), 1e-12);
  EXPECT_EQ(report.keywords[1].first, "detailed");
  EXPECT_EQ(report.keywords[1].second, 0.0);
}

TEST(KeywordTest, IdenticalNeighborsAreDeterministic) {
  const auto stats = CorpusStats::from_prompts(std::vector<std::string>{"a", "b", "c"});
  const auto ns = neighbors_of({"neon koi pond, moss", "neon koi pond, moss", "neon koi pond, moss"});
  const auto r1 = extract_keywords_and_entities(ns, stats, 10);
  const auto r2 = extract_keywords_and_entities(ns, stats, 10);
  EXPECT_EQ(r1.to_json(), r2.to_json());
  std::vector<std::string> terms;
  for (const auto& [t, s] : r1.keywords) terms.push_back(t);
  // Equal scores (3 * ln 3), so alphabetical.
  EXPECT_EQ(terms, (std::vector<std::string>{"koi", "moss", "neon", "pond"}));
}

TEST(KeywordTest, ReportInvariants) {
  std::mt19937_64 rng(12);
  const std::vector<std::string> words = {"Alice", "bob", "Carol", "dune", "Eve", "fern", "glow", "Hal"};
  std::vector<std::string> corpus;
  for (int i = 0; i < 200; ++i) {
    std::string p = "start";
    for (int w = 0; w < 6; ++w) p += (rng() % 3 == 0 ? ", " : " ") + words[rng() % words.size()];
    corpus.push_back(p);
  }
  const auto stats = CorpusStats::from_prompts(corpus);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::string> picked;
    for (int i = 0; i < 8; ++i) picked.push_back(corpus[rng() % corpus.size()]);
    const auto report = extract_keywords_and_entities(neighbors_of(picked), stats, 6);
    EXPECT_LE(report.keywords.size(), 6u);
    EXPECT_LE(report.named_entities.size(), 6u);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < report.keywords.size(); ++i) {
      EXPECT_TRUE(seen.insert(report.keywords[i].first).second);
      if (i > 0) EXPECT_GE(report.keywords[i - 1].second, report.keywords[i].second);
    }
    std::set<std::string> ents(report.named_entities.begin(), report.named_entities.end());
    EXPECT_EQ(ents.size(), report.named_entities.size());
  }
  EXPECT_THROW(extract_keywords_and_entities({}, stats, 3), Error);
}

}  // namespace
}  // namespace promptrecon::bank
