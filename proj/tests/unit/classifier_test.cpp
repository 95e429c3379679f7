// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/classifier.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "gradient_check.hpp"
#include "promptrecon/error.hpp"

namespace promptrecon::classifier {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::kInvalidArgument;
}

TEST(ForwardTest, ZeroModelScoresOneHalf) {
  const MlpModel m({6, 5, 4, 3});
  const std::vector<float> x = {1, -2, 3, 0.5F, 9, -1};
  for (float s : m.forward(x)) EXPECT_EQ(s, 0.5F);
}

TEST(ForwardTest, HandComputedToyNetwork) {
  BasicMlp<double> m({2, 2, 2, 2, 2}, 0.3);
  auto& L = m.layers();
  L[0].weights = {1, -1, 0.5, 0.5};
  L[0].biases = {0, -1};
  L[1].weights = {1, 1, -1, 0};
  L[1].biases = {0, 0};
  L[2].weights = {2, 0, 0, 1};
  L[2].biases = {-1, 0.5};
  L[3].weights = {1, -1, 0, 0};
  L[3].biases = {0, 0};
  // x=[2,1]: z1=[1,0.5] -> z2=[1.5,-1] relu [1.5,0] -> z3=[2,0.5] -> z4=[1.5,0].
  const auto out = m.forward(std::vector<double>{2, 1});
  EXPECT_NEAR(out[0], 0.8175744761936437, 1e-15);
  EXPECT_EQ(out[1], 0.5);
}

TEST(ForwardTest, ScoresInOpenUnitIntervalAndPure) {
  std::mt19937_64 rng(1);
  const auto m = MlpModel::initialized({16, 32, 32, 32, 10}, 0.3, 7);
  std::normal_distribution<float> g(0.0F, 1.0F);
  std::vector<float> x(16);
  for (auto& v : x) v = g(rng);
  const auto a = m.forward(x);
  EXPECT_EQ(a, m.forward(x));
  for (float s : a) {
    EXPECT_GT(s, 0.0F);
    EXPECT_LT(s, 1.0F);
  }
}

TEST(ForwardTest, SeededDropoutIsReproducible) {
  const auto m = MlpModel::initialized({8, 16, 16, 16, 4}, 0.3, 3);
  const std::vector<float> x = {1, 2, 3, 4, 5, 6, 7, 8};
  std::mt19937_64 r1(99);
  std::mt19937_64 r2(99);
  EXPECT_EQ(m.forward_train(x, r1), m.forward_train(x, r2));
  std::mt19937_64 r3(100);
  EXPECT_NE(m.forward_train(x, r1), m.forward_train(x, r3));
}

TEST(ForwardTest, Errors) {
  MlpModel m({3, 2});
  EXPECT_EQ(code_of([&] { m.forward(std::vector<float>{1, 2}); }), ErrorCode::kDimMismatch);
  m.layers()[0].weights[0] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_EQ(code_of([&] { m.forward(std::vector<float>{1, 2, 3}); }), ErrorCode::kNonFiniteParameter);
  EXPECT_EQ(code_of([] { MlpModel({3}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { MlpModel({3, 2}, 1.0); }), ErrorCode::kInvalidArgument);
}

TEST(DefaultsTest, ThreeHiddenLayers) {
  const auto dims = default_layer_dims(768, 1800);
  EXPECT_EQ(dims, (std::vector<std::size_t>{768, 1024, 512, 512, 1800}));
  const MlpModel m(dims);
  EXPECT_EQ(m.layers().size(), 4u);
  EXPECT_EQ(m.dropout_rate(), 0.3);
  const TrainConfig c;
  EXPECT_EQ(c.learning_rate, 0.001);
  EXPECT_EQ(c.epochs, 30u);
  EXPECT_EQ(c.k_default, 20u);
}

TEST(LossTest, UniformPredictionsGiveLn2) {
  const BasicMlp<double> m({3, 4});
  const std::vector<double> x = {1, 2, 3, -1, 0, 2};
  const std::vector<double> y = {1, 0, 1, 1, 0, 0, 0, 1};
  EXPECT_NEAR(m.loss(x, y), std::log(2.0), 1e-15);
}

TEST(LossTest, SaturatedCorrectPredictionsHitTheClamp) {
  BasicMlp<double> m({1, 2});
  m.layers()[0].biases = {100, -100};
  const std::vector<double> x = {0};
  const std::vector<double> y = {1, 0};
  EXPECT_NEAR(m.loss(x, y), -std::log(1.0 - kProbEpsilon), 1e-12);
  Gradients<double> g;
  m.loss_and_grad(x, y, &g, nullptr);
  EXPECT_EQ(g.layers[0].biases[0], 0.0);
  EXPECT_EQ(g.layers[0].biases[1], 0.0);
}

TEST(LossTest, NonNegativeAndPermutationInvariant) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    auto p = testing::random_problem(rng);
    const double loss = p.model.loss(p.x, p.y);
    EXPECT_GE(loss, 0.0);
    // Reverse the output units and the label columns together.
    auto permuted = p.model;
    auto& last = permuted.layers().back();
    const std::size_t d_out = last.out;
    const std::size_t d_in = last.in;
    auto w = last.weights;
    auto b = last.biases;
    for (std::size_t r = 0; r < d_out; ++r) {
      std::copy_n(w.begin() + static_cast<std::ptrdiff_t>((d_out - 1 - r) * d_in), d_in,
                  last.weights.begin() + static_cast<std::ptrdiff_t>(r * d_in));
      last.biases[r] = b[d_out - 1 - r];
    }
    auto y2 = p.y;
    for (std::size_t s = 0; s < y2.size() / d_out; ++s) {
      std::reverse(y2.begin() + static_cast<std::ptrdiff_t>(s * d_out),
                   y2.begin() + static_cast<std::ptrdiff_t>((s + 1) * d_out));
    }
    EXPECT_NEAR(permuted.loss(p.x, y2), loss, 1e-12);
  }
}

TEST(GradientTest, FourSampleToyBatch) {
  std::mt19937_64 rng(3);
  auto model = BasicMlp<double>::initialized({3, 4, 4, 4, 2}, 0.3, 5);
  std::vector<double> x(12);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : x) v = g(rng);
  const std::vector<double> y = {1, 0, 0, 1, 1, 1, 0, 0};
  EXPECT_LT(testing::gradient_check(model, x, y, std::nullopt).max_relative_error, 1e-4);
}

TEST(GradientTest, RandomSmallNetworks) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 25; ++t) {
    const auto p = testing::random_problem(rng);
    const auto r = testing::gradient_check(p.model, p.x, p.y, std::nullopt);
    EXPECT_LT(r.max_relative_error, 1e-4) << "trial " << t;
  }
}

TEST(GradientTest, WithFixedDropoutMasks) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const auto p = testing::random_problem(rng);
    EXPECT_LT(testing::gradient_check(p.model, p.x, p.y, std::uint64_t{1000 + static_cast<unsigned>(t)})
                  .max_relative_error,
              1e-4);
  }
}

TEST(GradientTest, FloatModelAgreesWithDouble) {
  auto md = BasicMlp<double>::initialized({5, 6, 3}, 0.0, 9);
  MlpModel mf({5, 6, 3}, 0.0, 9);
  for (std::size_t l = 0; l < md.layers().size(); ++l) {
    for (std::size_t i = 0; i < md.layers()[l].weights.size(); ++i) {
      mf.layers()[l].weights[i] = static_cast<float>(md.layers()[l].weights[i]);
      md.layers()[l].weights[i] = mf.layers()[l].weights[i];
    }
  }
  const std::vector<double> xd = {0.5, -1, 2, 0.25, -0.75};
  const std::vector<float> xf(xd.begin(), xd.end());
  const std::vector<double> yd = {1, 0, 1};
  const std::vector<float> yf(yd.begin(), yd.end());
  Gradients<double> gd;
  Gradients<float> gf;
  EXPECT_NEAR(md.loss_and_grad(xd, yd, &gd, nullptr), mf.loss_and_grad(xf, yf, &gf, nullptr), 1e-6);
  for (std::size_t l = 0; l < gd.layers.size(); ++l) {
    for (std::size_t i = 0; i < gd.layers[l].weights.size(); ++i) {
      EXPECT_NEAR(gd.layers[l].weights[i], gf.layers[l].weights[i], 1e-6);
    }
  }
}

// ---- training -------------------------------------------------------------

TrainingSplit separable_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0F, 1.0F);
  TrainingSplit s{{n, 4, {}}, {n, 2, {}}};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> x(4);
    for (auto& v : x) v = g(rng);
    s.inputs.data.insert(s.inputs.data.end(), x.begin(), x.end());
    s.labels.data.push_back(x[0] + x[1] > 0 ? 1.0F : 0.0F);
    s.labels.data.push_back(x[2] - x[3] > 0 ? 1.0F : 0.0F);
  }
  return s;
}

TEST(TrainTest, SeparableDataLossHalves) {
  const auto train_split = separable_data(400, 1);
  const auto val = separable_data(100, 2);
  auto model = MlpModel::initialized({4, 16, 16, 16, 2}, 0.3, 11);
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.batch_size = 16;
  cfg.seed = 3;
  const auto curve = train(model, train_split, &val, cfg);
  ASSERT_EQ(curve.train.size(), 31u);
  ASSERT_EQ(curve.validation.size(), 31u);
  EXPECT_LT(curve.train.back(), 0.5 * curve.train.front());
  EXPECT_LT(curve.validation.back(), 0.5 * curve.validation.front());
}

TEST(TrainTest, IdenticalSeedsGiveIdenticalWeights) {
  const auto data = separable_data(100, 4);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 3;
  cfg.seed = 8;
  auto a = MlpModel::initialized({4, 8, 8, 8, 2}, 0.3, 1);
  auto b = MlpModel::initialized({4, 8, 8, 8, 2}, 0.3, 1);
  train(a, data, nullptr, cfg);
  train(b, data, nullptr, cfg);
  std::ostringstream sa, sb;
  save_model(a, {}, sa);
  save_model(b, {}, sb);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(TrainTest, ZeroLearningRateIsFlat) {
  const auto data = separable_data(50, 5);
  auto model = MlpModel::initialized({4, 8, 8, 8, 2}, 0.3, 1);
  const auto before = model.layers();
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 4;
  const auto curve = train(model, data, nullptr, cfg);
  for (std::size_t l = 0; l < before.size(); ++l) {
    EXPECT_EQ(model.layers()[l].weights, before[l].weights);
    EXPECT_EQ(model.layers()[l].biases, before[l].biases);
  }
  for (double v : curve.train) EXPECT_EQ(v, curve.train.front());
  EXPECT_TRUE(curve.validation.empty());
}

TEST(TrainTest, Errors) {
  auto model = MlpModel::initialized({4, 2}, 0.3, 1);
  TrainingSplit empty{{0, 4, {}}, {0, 2, {}}};
  EXPECT_EQ(code_of([&] { train(model, empty, nullptr, {}); }), ErrorCode::kEmptyDataset);
  TrainConfig bad;
  bad.epochs = 0;
  EXPECT_EQ(code_of([&] { train(model, separable_data(4, 1), nullptr, bad); }), ErrorCode::kInvalidArgument);
  auto wrong = separable_data(4, 1);
  wrong.labels.cols = 3;
  EXPECT_EQ(code_of([&] { train(model, wrong, nullptr, {}); }), ErrorCode::kDimMismatch);
}

TEST(AssembleSplitTest, UsesImageVectors) {
  const auto bank = bank::EmbeddingBank::from_raw(2, {10, 20}, {1, 0, 0, 1}, {0, 3, 4, 0}, {"a", "b"});
  const std::vector<modifiers::LabeledSample> samples = {{20, {true, false}}, {10, {false, true}}};
  const auto s = assemble_split(samples, bank, 2);
  EXPECT_EQ(s.inputs.data, (std::vector<float>{1, 0, 0, 1}));
  EXPECT_EQ(s.labels.data, (std::vector<float>{1, 0, 0, 1}));
  const std::vector<modifiers::LabeledSample> missing = {{30, {true, false}}};
  EXPECT_EQ(code_of([&] { assemble_split(missing, bank, 2); }), ErrorCode::kMissingExample);
}

// ---- top-k and metrics ----------------------------------------------------

TEST(TopKTest, FullKSortedAndTies) {
  const std::vector<float> s = {0.2F, 0.9F, 0.2F, 0.5F};
  EXPECT_EQ(top_k(s, 4), (std::vector<ScoredLabel>{{1, 0.9F}, {3, 0.5F}, {0, 0.2F}, {2, 0.2F}}));
  EXPECT_EQ(code_of([&] { top_k(s, 0); }), ErrorCode::kBadK);
  EXPECT_EQ(code_of([&] { top_k(s, 5); }), ErrorCode::kBadK);
}

TEST(TopKTest, MatchesFullSortPrefix) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + rng() % 60;
    std::vector<float> s(d);
    // Coarse values force plenty of ties.
    for (auto& v : s) v = static_cast<float>(rng() % 10) / 10.0F;
    std::vector<std::size_t> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] != s[b] ? s[a] > s[b] : a < b; });
    const std::size_t k = 1 + rng() % d;
    const auto got = top_k(s, k);
    for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(got[i].label, idx[i]);
  }
}

TEST(TopKTest, PredictUsesConfigDefault) {
  const auto m = MlpModel::initialized({4, 8, 30}, 0.3, 2);
  const auto top = predict_topk(m, std::vector<float>{1, 2, 3, 4}, TrainConfig{}.k_default);
  EXPECT_EQ(top.size(), 20u);
}

TEST(PrecisionRecallTest, PerfectScorer) {
  // Truth sizes 3 and 1; scores rank the truth labels first.
  Matrix truth{2, 6, {1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0}};
  Matrix scores{2, 6, {0.9F, 0.8F, 0.7F, 0.1F, 0.1F, 0.1F, 0.1F, 0.1F, 0.1F, 0.1F, 0.9F, 0.1F}};
  const std::vector<std::size_t> ks = {1, 2, 5};
  const auto pr = precision_recall_at_k(scores, truth, ks);
  for (std::size_t k : ks) {
    const double kk = static_cast<double>(k);
    const double p = (std::min(3.0, kk) / kk + std::min(1.0, kk) / kk) / 2;
    const double r = (std::min(3.0, kk) / 3.0 + std::min(1.0, kk) / 1.0) / 2;
    EXPECT_DOUBLE_EQ(pr.at(k).precision, p);
    EXPECT_DOUBLE_EQ(pr.at(k).recall, r);
  }
}

TEST(PrecisionRecallTest, MatchesRecountAndTradeOffLaw) {
  std::mt19937_64 rng(7);
  const std::size_t n = 20, d = 12;
  Matrix scores{n, d, {}};
  Matrix truth{n, d, {}};
  for (std::size_t i = 0; i < n * d; ++i) {
    scores.data.push_back(static_cast<float>(rng() % 1000) / 1000.0F);
    truth.data.push_back(rng() % 4 == 0 ? 1.0F : 0.0F);
  }
  // One sample with no truth: counted for precision only.
  std::fill_n(truth.data.begin(), d, 0.0F);
  std::vector<std::size_t> ks(d);
  std::iota(ks.begin(), ks.end(), 1);
  const auto pr = precision_recall_at_k(scores, truth, ks);
  double prev_recall = -1, prev_hits = -1;
  for (std::size_t k : ks) {
    double p = 0, r = 0;
    std::size_t with_truth = 0;
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<std::size_t> idx(d);
      std::iota(idx.begin(), idx.end(), 0);
      const float* row = scores.data.data() + s * d;
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
      double hits = 0, size = 0;
      for (std::size_t j = 0; j < d; ++j) size += truth.data[s * d + j];
      for (std::size_t j = 0; j < k; ++j) hits += truth.data[s * d + idx[j]];
      p += hits / static_cast<double>(k);
      if (size > 0) {
        r += hits / size;
        ++with_truth;
      }
    }
    EXPECT_NEAR(pr.at(k).precision, p / n, 1e-12);
    EXPECT_NEAR(pr.at(k).recall, r / static_cast<double>(with_truth), 1e-12);
    EXPECT_EQ(pr.at(k).recall_samples, n - 1);
    EXPECT_GE(pr.at(k).recall, prev_recall);
    EXPECT_GE(static_cast<double>(k) * pr.at(k).precision, prev_hits - 1e-12);
    prev_recall = pr.at(k).recall;
    prev_hits = static_cast<double>(k) * pr.at(k).precision;
  }
  EXPECT_NEAR(pr.at(d).recall, 1.0, 1e-12);
}

TEST(PrecisionRecallTest, Errors) {
  const std::vector<std::size_t> ks = {1};
  EXPECT_EQ(code_of([&] { precision_recall_at_k(Matrix{0, 3, {}}, Matrix{0, 3, {}}, ks); }), ErrorCode::kNoEvalSamples);
  const auto m = MlpModel::initialized({2, 3}, 0.3, 1);
  TrainingSplit empty{{0, 2, {}}, {0, 3, {}}};
  EXPECT_EQ(code_of([&] { eval_precision_recall_at_k(m, empty, ks); }), ErrorCode::kNoEvalSamples);
}

// ---- persistence ----------------------------------------------------------

TEST(ModelFileTest, RoundTrip) {
  const auto m = MlpModel::initialized({5, 7, 3}, 0.25, 42);
  std::ostringstream out;
  save_model(m, {"8k", "octane render", "4k"}, out);
  const auto bytes = out.str();
  const auto nl = bytes.find('\n');
  EXPECT_EQ(bytes.size() - nl - 1, m.parameter_count() * 4);
  std::istringstream in(bytes);
  const auto loaded = load_model(in);
  EXPECT_EQ(loaded.labels, (std::vector<std::string>{"8k", "octane render", "4k"}));
  EXPECT_EQ(loaded.model.layer_dims(), m.layer_dims());
  EXPECT_EQ(loaded.model.dropout_rate(), 0.25);
  EXPECT_EQ(loaded.model.seed(), 42u);
  for (std::size_t l = 0; l < m.layers().size(); ++l) EXPECT_EQ(loaded.model.layers()[l].weights, m.layers()[l].weights);
}

TEST(ModelFileTest, Corruption) {
  const auto m = MlpModel::initialized({2, 3}, 0.3, 1);
  std::ostringstream out;
  save_model(m, {}, out);
  const auto bytes = out.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() - 1));
  EXPECT_EQ(code_of([&] { load_model(truncated); }), ErrorCode::kTruncatedFile);
  std::istringstream trailing(bytes + "x");
  EXPECT_EQ(code_of([&] { load_model(trailing); }), ErrorCode::kTrailingData);
  std::istringstream garbage("not json\n");
  EXPECT_EQ(code_of([&] { load_model(garbage); }), ErrorCode::kParse);
  auto nan = bytes;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + bytes.find('\n') + 1, &q, 4);
  std::istringstream nan_in(nan);
  EXPECT_EQ(code_of([&] { load_model(nan_in); }), ErrorCode::kNonFiniteParameter);
}

}  // namespace
}  // namespace promptrecon::classifier
