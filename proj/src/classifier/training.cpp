// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "binary_io.hpp"
#include "promptrecon/classifier.hpp"
#include "promptrecon/error.hpp"

namespace promptrecon::classifier {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kInvalidArgument, "learning_rate must be finite and >= 0");
  }
  if (epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (k_default < 1) throw Error(ErrorCode::kInvalidArgument, "k_default must be >= 1");
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.k_default = j.value("k_default", c.k_default);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::ordered_json LossCurve::to_json() const {
  nlohmann::ordered_json j;
  j["train"] = train;
  j["validation"] = validation;
  return j;
}

namespace {

void check_split(const MlpModel& model, const TrainingSplit& split, const char* name) {
  if (split.inputs.rows != split.labels.rows || split.inputs.cols != model.input_dim() ||
      split.labels.cols != model.output_dim() || split.inputs.data.size() != split.inputs.rows * split.inputs.cols ||
      split.labels.data.size() != split.labels.rows * split.labels.cols) {
    throw Error(ErrorCode::kDimMismatch, std::string(name) + " split does not match the model dims");
  }
}

double split_loss(const MlpModel& model, const TrainingSplit& split) {
  return model.loss(split.inputs.data, split.labels.data);
}

}  // namespace

LossCurve train(MlpModel& model, const TrainingSplit& train_split, const TrainingSplit* validation,
                const TrainConfig& config) {
  config.validate();
  if (train_split.inputs.rows == 0) throw Error(ErrorCode::kEmptyDataset, "training split is empty");
  check_split(model, train_split, "training");
  const bool has_val = validation != nullptr && validation->inputs.rows > 0;
  if (has_val) check_split(model, *validation, "validation");

  LossCurve curve;
  curve.train.push_back(split_loss(model, train_split));
  if (has_val) curve.validation.push_back(split_loss(model, *validation));

  std::mt19937_64 rng(config.seed);
  const std::size_t n = train_split.inputs.rows;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto grad = model.zero_gradients();
  std::vector<float> xb;
  std::vector<float> yb;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      xb.clear();
      yb.clear();
      for (std::size_t i = start; i < end; ++i) {
        const auto x = train_split.inputs.row(order[i]);
        const auto y = train_split.labels.row(order[i]);
        xb.insert(xb.end(), x.begin(), x.end());
        yb.insert(yb.end(), y.begin(), y.end());
      }
      model.loss_and_grad(xb, yb, &grad, &rng);
      model.apply_sgd(grad, config.learning_rate);
    }
    if (!model.parameters_finite()) {
      throw Error(ErrorCode::kNonFiniteParameter, "training diverged in epoch " + std::to_string(epoch + 1));
    }
    curve.train.push_back(split_loss(model, train_split));
    if (has_val) curve.validation.push_back(split_loss(model, *validation));
  }
  return curve;
}

std::vector<ScoredLabel> top_k(std::span<const float> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw Error(ErrorCode::kBadK, "k=" + std::to_string(k) + " outside [1," + std::to_string(scores.size()) + "]");
  }
  std::vector<ScoredLabel> all(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) all[i] = {i, scores[i]};
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const ScoredLabel& a, const ScoredLabel& b) {
                      return a.score != b.score ? a.score > b.score : a.label < b.label;
                    });
  all.resize(k);
  return all;
}

std::vector<ScoredLabel> predict_topk(const MlpModel& model, std::span<const float> embedding, std::size_t k) {
  return top_k(model.forward(embedding), k);
}

std::map<std::size_t, PrecisionRecall> precision_recall_at_k(const Matrix& scores, const Matrix& truth,
                                                             std::span<const std::size_t> ks) {
  if (scores.rows == 0) throw Error(ErrorCode::kNoEvalSamples, "no evaluation samples");
  if (truth.rows != scores.rows || truth.cols != scores.cols) {
    throw Error(ErrorCode::kDimMismatch, "score and truth matrices differ in shape");
  }
  if (ks.empty()) throw Error(ErrorCode::kBadK, "no k values requested");
  std::size_t k_max = 0;
  for (std::size_t k : ks) {
    if (k < 1 || k > scores.cols) throw Error(ErrorCode::kBadK, "k=" + std::to_string(k) + " out of range");
    k_max = std::max(k_max, k);
  }

  std::map<std::size_t, PrecisionRecall> out;
  for (std::size_t k : ks) out[k] = {};
  std::size_t with_truth = 0;
  for (std::size_t s = 0; s < scores.rows; ++s) {
    const auto y = truth.row(s);
    std::size_t truth_size = 0;
    for (float v : y) truth_size += v != 0.0F;
    with_truth += truth_size > 0;
    const auto ranked = top_k(scores.row(s), k_max);
    // hits_at[r] = hits among the first r+1 ranked labels.
    std::vector<std::size_t> hits_at(k_max);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k_max; ++r) {
      hits += y[ranked[r].label] != 0.0F;
      hits_at[r] = hits;
    }
    for (auto& [k, pr] : out) {
      const auto h = static_cast<double>(hits_at[k - 1]);
      pr.precision += h / static_cast<double>(k);
      if (truth_size > 0) pr.recall += h / static_cast<double>(truth_size);
    }
  }
  for (auto& [k, pr] : out) {
    pr.precision /= static_cast<double>(scores.rows);
    pr.recall = with_truth > 0 ? pr.recall / static_cast<double>(with_truth) : 0.0;
    pr.recall_samples = with_truth;
  }
  return out;
}

std::map<std::size_t, PrecisionRecall> eval_precision_recall_at_k(const MlpModel& model, const TrainingSplit& eval,
                                                                  std::span<const std::size_t> ks) {
  if (eval.inputs.rows == 0) throw Error(ErrorCode::kNoEvalSamples, "no evaluation samples");
  check_split(model, eval, "evaluation");
  Matrix scores{eval.inputs.rows, model.output_dim(), {}};
  scores.data.reserve(scores.rows * scores.cols);
  for (std::size_t s = 0; s < eval.inputs.rows; ++s) {
    const auto out = model.forward(eval.inputs.row(s));
    scores.data.insert(scores.data.end(), out.begin(), out.end());
  }
  return precision_recall_at_k(scores, eval.labels, ks);
}

TrainingSplit assemble_split(std::span<const modifiers::LabeledSample> samples, const bank::EmbeddingBank& bank,
                             std::size_t label_count) {
  TrainingSplit split;
  split.inputs = {samples.size(), bank.dim(), {}};
  split.labels = {samples.size(), label_count, {}};
  split.inputs.data.reserve(samples.size() * bank.dim());
  split.labels.data.reserve(samples.size() * label_count);
  for (const auto& s : samples) {
    const auto row = bank.index_of(s.record_id);
    if (!row) {
      throw Error(ErrorCode::kMissingExample, "record " + std::to_string(s.record_id) + " has no bank embedding");
    }
    if (s.labels.size() != label_count) throw Error(ErrorCode::kDimMismatch, "label vector length mismatch");
    const auto v = bank.row(bank::Side::kImage, *row);
    split.inputs.data.insert(split.inputs.data.end(), v.begin(), v.end());
    for (bool b : s.labels) split.labels.data.push_back(b ? 1.0F : 0.0F);
  }
  return split;
}

// ---- persistence ----------------------------------------------------------

namespace {
constexpr const char* kModelFormat = "promptrecon-mlp";
constexpr int kModelVersion = 1;
}  // namespace

void save_model(const MlpModel& model, const std::vector<std::string>& labels, std::ostream& out) {
  if (!labels.empty() && labels.size() != model.output_dim()) {
    throw Error(ErrorCode::kDimMismatch, "label names do not match the output dim");
  }
  nlohmann::ordered_json header;
  header["format"] = kModelFormat;
  header["version"] = kModelVersion;
  header["layer_dims"] = model.layer_dims();
  header["dropout"] = model.dropout_rate();
  header["seed"] = model.seed();
  header["parameter_count"] = model.parameter_count();
  header["labels"] = labels;
  binary::Writer w;
  w.put_bytes(header.dump());
  w.put_bytes("\n");
  for (const auto& layer : model.layers()) {
    w.put_floats(layer.weights);
    w.put_floats(layer.biases);
  }
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw Error(ErrorCode::kIo, "failed writing model");
}

void save_model(const MlpModel& model, const std::vector<std::string>& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  save_model(model, labels, out);
}

LoadedModel load_model(std::istream& in) {
  const std::string data(std::istreambuf_iterator<char>(in), {});
  const auto nl = data.find('\n');
  if (nl == std::string::npos) throw Error(ErrorCode::kParse, "model file has no header line");
  LoadedModel loaded;
  std::size_t expected = 0;
  try {
    const auto header = nlohmann::json::parse(data.substr(0, nl));
    if (header.at("format").get<std::string>() != kModelFormat) throw Error(ErrorCode::kParse, "not an MLP model file");
    if (header.at("version").get<int>() != kModelVersion) {
      throw Error(ErrorCode::kVersionUnsupported, "model format version " + header.at("version").dump());
    }
    loaded.model = MlpModel(header.at("layer_dims").get<std::vector<std::size_t>>(), header.at("dropout").get<double>(),
                            header.at("seed").get<std::uint64_t>());
    loaded.labels = header.value("labels", std::vector<std::string>{});
    expected = header.at("parameter_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model header: ") + e.what());
  }
  if (expected != loaded.model.parameter_count()) {
    throw Error(ErrorCode::kParse, "parameter_count disagrees with layer_dims");
  }
  if (!loaded.labels.empty() && loaded.labels.size() != loaded.model.output_dim()) {
    throw Error(ErrorCode::kParse, "label names do not match the output dim");
  }
  binary::Reader r(std::string_view(data).substr(nl + 1));
  for (auto& layer : loaded.model.layers()) {
    r.get_floats(layer.weights.data(), layer.weights.size());
    r.get_floats(layer.biases.data(), layer.biases.size());
  }
  if (r.remaining() != 0) throw Error(ErrorCode::kTrailingData, "bytes after the model parameters");
  if (!loaded.model.parameters_finite()) throw Error(ErrorCode::kNonFiniteParameter, "model has non-finite parameters");
  return loaded;
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open model " + path.string());
  try {
    return load_model(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace promptrecon::classifier
