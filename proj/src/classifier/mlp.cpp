// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "promptrecon/classifier.hpp"
#include "promptrecon/error.hpp"
#include "promptrecon/simd.hpp"

namespace promptrecon::classifier {

std::vector<std::size_t> default_layer_dims(std::size_t d_in, std::size_t d_out) {
  return {d_in, 1024, 512, 512, d_out};
}

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename Real>
Real sigmoid(Real z) {
  if (z >= 0) return Real(1) / (Real(1) + std::exp(-z));
  const Real e = std::exp(z);
  return e / (Real(1) + e);
}

// Per-sample activations kept for backprop. acts[0] is the input; acts[l+1]
// the output of layer l (after ReLU and dropout for hidden layers, after the
// sigmoid for the last). pre[l] holds layer l's pre-activation and mask[l]
// its dropout multiplier (empty when dropout is off).
template <typename Real>
struct Trace {
  std::vector<std::vector<Real>> acts;
  std::vector<std::vector<Real>> pre;
  std::vector<std::vector<Real>> mask;
};

template <typename Real>
void run_forward(const std::vector<Layer<Real>>& layers, double dropout, std::span<const Real> x,
                 std::mt19937_64* rng, Trace<Real>& t) {
  const std::size_t n_layers = layers.size();
  t.acts.resize(n_layers + 1);
  t.pre.resize(n_layers);
  t.mask.resize(n_layers);
  t.acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = layers[l];
    auto& z = t.pre[l];
    z.resize(layer.out);
    simd::matvec(std::span<const Real>(layer.weights), layer.out, std::span<const Real>(t.acts[l]), std::span<Real>(z));
    for (std::size_t i = 0; i < layer.out; ++i) z[i] += layer.biases[i];
    auto& a = t.acts[l + 1];
    a.resize(layer.out);
    if (l + 1 == n_layers) {
      for (std::size_t i = 0; i < layer.out; ++i) a[i] = sigmoid(z[i]);
      t.mask[l].clear();
      continue;
    }
    for (std::size_t i = 0; i < layer.out; ++i) a[i] = z[i] > 0 ? z[i] : Real(0);
    if (rng != nullptr && dropout > 0.0) {
      auto& m = t.mask[l];
      m.resize(layer.out);
      const Real keep_scale = static_cast<Real>(1.0 / (1.0 - dropout));
      for (std::size_t i = 0; i < layer.out; ++i) {
        m[i] = unit_uniform(*rng) >= dropout ? keep_scale : Real(0);
        a[i] *= m[i];
      }
    } else {
      t.mask[l].clear();
    }
  }
}

}  // namespace

template <typename Real>
BasicMlp<Real>::BasicMlp(std::vector<std::size_t> layer_dims, double dropout_rate, std::uint64_t seed)
    : dims_(std::move(layer_dims)), dropout_(dropout_rate), seed_(seed) {
  if (dims_.size() < 2) throw Error(ErrorCode::kInvalidArgument, "an MLP needs at least input and output dims");
  for (std::size_t d : dims_) {
    if (d == 0) throw Error(ErrorCode::kInvalidArgument, "layer dims must be positive");
  }
  if (!(dropout_ >= 0.0 && dropout_ < 1.0)) throw Error(ErrorCode::kInvalidArgument, "dropout must lie in [0,1)");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    Layer<Real> layer;
    layer.in = dims_[l];
    layer.out = dims_[l + 1];
    layer.weights.assign(layer.in * layer.out, Real(0));
    layer.biases.assign(layer.out, Real(0));
    layers_.push_back(std::move(layer));
  }
}

template <typename Real>
BasicMlp<Real> BasicMlp<Real>::initialized(std::vector<std::size_t> layer_dims, double dropout_rate,
                                           std::uint64_t seed) {
  BasicMlp m(std::move(layer_dims), dropout_rate, seed);
  std::mt19937_64 rng(seed);
  for (auto& layer : m.layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
    for (auto& w : layer.weights) w = static_cast<Real>((2.0 * unit_uniform(rng) - 1.0) * bound);
  }
  return m;
}

template <typename Real>
std::size_t BasicMlp<Real>::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
  return n;
}

template <typename Real>
bool BasicMlp<Real>::parameters_finite() const noexcept {
  for (const auto& l : layers_) {
    for (Real w : l.weights) {
      if (!std::isfinite(w)) return false;
    }
    for (Real b : l.biases) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

template <typename Real>
std::vector<Real> BasicMlp<Real>::forward(std::span<const Real> x) const {
  if (x.size() != input_dim()) {
    throw Error(ErrorCode::kDimMismatch,
                "input dim " + std::to_string(x.size()) + " != model input " + std::to_string(input_dim()));
  }
  Trace<Real> t;
  run_forward(layers_, dropout_, x, nullptr, t);
  auto& out = t.acts.back();
  for (Real s : out) {
    if (std::isnan(s)) {
      if (!parameters_finite()) throw Error(ErrorCode::kNonFiniteParameter, "model has non-finite parameters");
      throw Error(ErrorCode::kInvalidArgument, "non-finite input embedding");
    }
  }
  return std::move(out);
}

template <typename Real>
std::vector<Real> BasicMlp<Real>::forward_train(std::span<const Real> x, std::mt19937_64& rng) const {
  if (x.size() != input_dim()) throw Error(ErrorCode::kDimMismatch, "input dim mismatch");
  Trace<Real> t;
  run_forward(layers_, dropout_, x, &rng, t);
  return std::move(t.acts.back());
}

template <typename Real>
Gradients<Real> BasicMlp<Real>::zero_gradients() const {
  Gradients<Real> g;
  g.layers = layers_;
  for (auto& l : g.layers) {
    std::fill(l.weights.begin(), l.weights.end(), Real(0));
    std::fill(l.biases.begin(), l.biases.end(), Real(0));
  }
  return g;
}

template <typename Real>
double BasicMlp<Real>::loss_and_grad(std::span<const Real> inputs, std::span<const Real> labels, Gradients<Real>* grad,
                                     std::mt19937_64* dropout_rng) const {
  const std::size_t d_in = input_dim();
  const std::size_t d_out = output_dim();
  if (inputs.size() % d_in != 0 || labels.size() % d_out != 0 || inputs.size() / d_in != labels.size() / d_out) {
    throw Error(ErrorCode::kDimMismatch, "batch inputs and labels disagree with the model dims");
  }
  const std::size_t n = inputs.size() / d_in;
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "empty batch");
  if (grad != nullptr) {
    if (grad->layers.size() != layers_.size()) {
      *grad = zero_gradients();
    } else {
      for (auto& l : grad->layers) {
        std::fill(l.weights.begin(), l.weights.end(), Real(0));
        std::fill(l.biases.begin(), l.biases.end(), Real(0));
      }
    }
  }

  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(d_out));
  double total = 0.0;
  Trace<Real> t;
  std::vector<Real> delta;
  std::vector<Real> back;
  for (std::size_t s = 0; s < n; ++s) {
    run_forward(layers_, dropout_, inputs.subspan(s * d_in, d_in), dropout_rng, t);
    const auto& p = t.acts.back();
    const auto y = labels.subspan(s * d_out, d_out);
    delta.assign(d_out, Real(0));
    for (std::size_t j = 0; j < d_out; ++j) {
      const double pj = static_cast<double>(p[j]);
      const double pc = std::clamp(pj, kProbEpsilon, 1.0 - kProbEpsilon);
      const double yj = static_cast<double>(y[j]);
      total -= yj * std::log(pc) + (1.0 - yj) * std::log(1.0 - pc);
      // d/dz of the clamped BCE: (p - y) inside the clamp, 0 where it binds.
      if (pj > kProbEpsilon && pj < 1.0 - kProbEpsilon) delta[j] = static_cast<Real>((pj - yj) * scale);
    }
    if (grad == nullptr) continue;

    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& layer = layers_[l];
      auto& g = grad->layers[l];
      const auto& a_prev = t.acts[l];
      for (std::size_t r = 0; r < layer.out; ++r) {
        if (delta[r] == Real(0)) continue;
        simd::axpy(delta[r], std::span<const Real>(a_prev), std::span<Real>(g.weights.data() + r * layer.in, layer.in));
        g.biases[r] += delta[r];
      }
      if (l == 0) break;
      back.assign(layer.in, Real(0));
      for (std::size_t r = 0; r < layer.out; ++r) {
        if (delta[r] == Real(0)) continue;
        simd::axpy(delta[r], std::span<const Real>(layer.weights.data() + r * layer.in, layer.in), std::span<Real>(back));
      }
      // Through the previous hidden layer's dropout and ReLU.
      const auto& z = t.pre[l - 1];
      const auto& m = t.mask[l - 1];
      for (std::size_t i = 0; i < layer.in; ++i) {
        Real d = z[i] > 0 ? back[i] : Real(0);
        if (!m.empty()) d *= m[i];
        back[i] = d;
      }
      delta.swap(back);
    }
  }
  return total * scale;
}

template <typename Real>
void BasicMlp<Real>::apply_sgd(const Gradients<Real>& grad, double learning_rate) {
  if (grad.layers.size() != layers_.size()) throw Error(ErrorCode::kDimMismatch, "gradient shape mismatch");
  const auto step = static_cast<Real>(-learning_rate);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    simd::axpy(step, std::span<const Real>(grad.layers[l].weights), std::span<Real>(layers_[l].weights));
    simd::axpy(step, std::span<const Real>(grad.layers[l].biases), std::span<Real>(layers_[l].biases));
  }
}

template class BasicMlp<float>;
template class BasicMlp<double>;

}  // namespace promptrecon::classifier
