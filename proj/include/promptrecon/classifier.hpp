// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Multi-label MLP over image embeddings: ReLU hidden layers with inverted
// dropout, sigmoid outputs, binary cross-entropy, plain mini-batch SGD.
//
// BasicMlp<float> is the production model. BasicMlp<double> exists for
// finite-difference gradient checks.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptrecon/bank.hpp"
#include "promptrecon/modifiers.hpp"

namespace promptrecon::classifier {

inline constexpr double kProbEpsilon = 1e-7;

/// [d_in, 1024, 512, 512, d_out].
std::vector<std::size_t> default_layer_dims(std::size_t d_in, std::size_t d_out);

template <typename Real>
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<Real> weights;  // out x in, row-major
  std::vector<Real> biases;   // out
};

template <typename Real>
struct Gradients {
  std::vector<Layer<Real>> layers;  // same shapes as the model
};

template <typename Real>
class BasicMlp {
 public:
  BasicMlp() = default;

  /// Zero weights and biases. Throws Error(kInvalidArgument) for fewer than
  /// two dims, a zero dim, or dropout outside [0,1).
  BasicMlp(std::vector<std::size_t> layer_dims, double dropout_rate = 0.3, std::uint64_t seed = 0);

  /// He-uniform weights from `seed`, zero biases.
  static BasicMlp initialized(std::vector<std::size_t> layer_dims, double dropout_rate, std::uint64_t seed);

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  std::size_t input_dim() const noexcept { return dims_.front(); }
  std::size_t output_dim() const noexcept { return dims_.back(); }
  double dropout_rate() const noexcept { return dropout_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::vector<Layer<Real>>& layers() noexcept { return layers_; }
  const std::vector<Layer<Real>>& layers() const noexcept { return layers_; }
  std::size_t parameter_count() const noexcept;

  /// Inference: dropout off, pure. Scores lie in (0,1).
  /// Errors: kDimMismatch, kNonFiniteParameter.
  std::vector<Real> forward(std::span<const Real> x) const;

  /// Training-mode forward. The dropout masks are drawn from `rng`, so equal
  /// rng states give equal outputs.
  std::vector<Real> forward_train(std::span<const Real> x, std::mt19937_64& rng) const;

  /// Mean BCE over samples and labels for a row-major batch (n x d_in inputs,
  /// n x d_out labels in {0,1}). Gradients match the loss exactly, including
  /// the zero slope where a probability is clamped. `dropout_rng` null means
  /// dropout off.
  double loss_and_grad(std::span<const Real> inputs, std::span<const Real> labels, Gradients<Real>* grad,
                       std::mt19937_64* dropout_rng) const;

  /// Loss only, dropout off.
  double loss(std::span<const Real> inputs, std::span<const Real> labels) const {
    return loss_and_grad(inputs, labels, nullptr, nullptr);
  }

  Gradients<Real> zero_gradients() const;

  /// params -= lr * grad.
  void apply_sgd(const Gradients<Real>& grad, double learning_rate);

  /// True when every weight and bias is finite.
  bool parameters_finite() const noexcept;

 private:
  std::vector<std::size_t> dims_;
  double dropout_ = 0.3;
  std::uint64_t seed_ = 0;
  std::vector<Layer<Real>> layers_;
};

extern template class BasicMlp<float>;
extern template class BasicMlp<double>;

using MlpModel = BasicMlp<float>;

// ---- training -------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::size_t k_default = 20;

  /// Throws Error(kInvalidArgument).
  void validate() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Row-major features and 0/1 labels.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t r) const { return std::span<const float>(data).subspan(r * cols, cols); }
};

struct TrainingSplit {
  Matrix inputs;
  Matrix labels;
};

struct LossCurve {
  // Index 0 holds the loss before the first epoch; entry e the loss after
  // epoch e. Both are dropout-off mean BCE over the whole split.
  std::vector<double> train;
  std::vector<double> validation;  // empty without a validation split

  nlohmann::ordered_json to_json() const;
};

/// Image embeddings of each sample's record id, with its label vector.
/// Throws Error(kMissingExample) when the bank lacks a record.
TrainingSplit assemble_split(std::span<const modifiers::LabeledSample> samples, const bank::EmbeddingBank& bank,
                             std::size_t label_count);

/// Shuffles with the config seed each epoch; the model's dropout masks come
/// from the same stream. Errors: kEmptyDataset, kDimMismatch.
LossCurve train(MlpModel& model, const TrainingSplit& train_split, const TrainingSplit* validation,
                const TrainConfig& config);

// ---- inference and metrics ------------------------------------------------

struct ScoredLabel {
  std::size_t label = 0;
  float score = 0.0F;

  bool operator==(const ScoredLabel&) const = default;
};

/// Top-k by score descending, ties by ascending label. Throws Error(kBadK).
std::vector<ScoredLabel> top_k(std::span<const float> scores, std::size_t k);
std::vector<ScoredLabel> predict_topk(const MlpModel& model, std::span<const float> embedding, std::size_t k);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t recall_samples = 0;  // samples with a non-empty truth set
};

/// precision(k) = mean |topk ∩ truth| / k over all samples; recall(k) = mean
/// |topk ∩ truth| / |truth| over samples with non-empty truth (0 when there
/// are none). `scores` is n x d_out, `truth` holds n label rows.
/// Errors: kNoEvalSamples, kBadK, kDimMismatch.
std::map<std::size_t, PrecisionRecall> precision_recall_at_k(const Matrix& scores, const Matrix& truth,
                                                             std::span<const std::size_t> ks);
std::map<std::size_t, PrecisionRecall> eval_precision_recall_at_k(const MlpModel& model, const TrainingSplit& eval,
                                                                  std::span<const std::size_t> ks);

// ---- persistence ----------------------------------------------------------

/// One JSON header line {format, version, layer_dims, dropout, seed,
/// parameter_count, labels}, then the parameters as little-endian f32, layer
/// by layer, weights before biases. `labels` names the output units and may
/// be empty.
void save_model(const MlpModel& model, const std::vector<std::string>& labels, std::ostream& out);
void save_model(const MlpModel& model, const std::vector<std::string>& labels, const std::filesystem::path& path);

struct LoadedModel {
  MlpModel model;
  std::vector<std::string> labels;
};

/// Errors: kParse, kTruncatedFile, kTrailingData, kNonFiniteParameter, kIo.
LoadedModel load_model(std::istream& in);
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace promptrecon::classifier
