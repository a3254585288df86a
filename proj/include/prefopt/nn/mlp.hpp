// Copyright 2026 The prefopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense multilayer perceptron with a hand-written backward pass.
//
// Batches are column-major: an input batch is a (input_dim x batch_size)
// matrix whose columns are samples. Layer l computes
//   z_l = W_l h_l + b_l,   h_{l+1} = act(z_l) (hidden) or out(z_l) (last)
// with W_l of shape (layer_dims[l+1] x layer_dims[l]).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "prefopt/error.hpp"
#include "prefopt/rng.hpp"

namespace prefopt::nn {

enum class Activation {
  kIdentity,
  kTanh,
  kRelu,
  // offset + scale * tanh(z), elementwise. Used to squash policy outputs
  // into an action box.
  kBoundedTanh,
};

inline std::string ActivationName(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kBoundedTanh: return "bounded_tanh";
  }
  return "identity";
}

inline Activation ParseActivation(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "bounded_tanh") return Activation::kBoundedTanh;
  throw InvalidArgument("unknown activation '" + name + "'");
}

struct MlpModel {
  std::vector<int> layer_dims;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation hidden_activation = Activation::kTanh;
  Activation output_activation = Activation::kIdentity;
  // Only read when output_activation == kBoundedTanh.
  Eigen::VectorXd output_offset;
  Eigen::VectorXd output_scale;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (int l = 0; l < num_layers(); ++l) {
      n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
  }

  void Validate() const {
    if (layer_dims.size() < 2) {
      throw DimensionError("model", "need at least input and output dims");
    }
    if (weights.size() + 1 != layer_dims.size() ||
        biases.size() + 1 != layer_dims.size()) {
      throw DimensionError("model", "layer count does not match layer_dims");
    }
    for (int l = 0; l < num_layers(); ++l) {
      if (layer_dims[l] <= 0 || layer_dims[l + 1] <= 0) {
        throw DimensionError("layer " + std::to_string(l),
                             "layer dims must be positive");
      }
      if (weights[l].rows() != layer_dims[l + 1] ||
          weights[l].cols() != layer_dims[l]) {
        throw DimensionError("layer " + std::to_string(l),
                             "weight shape mismatch");
      }
      if (biases[l].size() != layer_dims[l + 1]) {
        throw DimensionError("layer " + std::to_string(l),
                             "bias length mismatch");
      }
    }
    if (output_activation == Activation::kBoundedTanh &&
        (output_offset.size() != output_dim() ||
         output_scale.size() != output_dim())) {
      throw DimensionError("output", "bounded_tanh needs offset and scale");
    }
  }
};

// Glorot-uniform weights, zero biases. With rng == nullptr every parameter
// is zero.
inline MlpModel MakeMlp(std::vector<int> layer_dims, Activation hidden,
                        Activation output, Rng* rng) {
  MlpModel m;
  m.layer_dims = std::move(layer_dims);
  m.hidden_activation = hidden;
  m.output_activation = output;
  if (m.layer_dims.size() < 2) {
    throw DimensionError("model", "need at least input and output dims");
  }
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    const int in = m.layer_dims[l];
    const int out = m.layer_dims[l + 1];
    if (in <= 0 || out <= 0) {
      throw DimensionError("layer " + std::to_string(l),
                           "layer dims must be positive");
    }
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(out, in);
    if (rng != nullptr) {
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      for (int j = 0; j < in; ++j) {
        for (int i = 0; i < out; ++i) w(i, j) = rng->Uniform(-limit, limit);
      }
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  if (output == Activation::kBoundedTanh) {
    m.output_offset = Eigen::VectorXd::Zero(m.output_dim());
    m.output_scale = Eigen::VectorXd::Ones(m.output_dim());
  }
  return m;
}

// Configures a bounded-tanh output so that outputs lie in [low, high].
inline void SetOutputBox(MlpModel& m, const Eigen::VectorXd& low,
                         const Eigen::VectorXd& high) {
  if (low.size() != m.output_dim() || high.size() != m.output_dim()) {
    throw DimensionError("output", "box size does not match output dim");
  }
  m.output_activation = Activation::kBoundedTanh;
  m.output_offset = 0.5 * (low + high);
  m.output_scale = 0.5 * (high - low);
}

// Per-parameter accumulators with the same shapes as an MlpModel.
struct GradBuffer {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static GradBuffer ZerosLike(const MlpModel& m) {
    GradBuffer g;
    for (int l = 0; l < m.num_layers(); ++l) {
      g.weights.push_back(Eigen::MatrixXd::Zero(m.weights[l].rows(),
                                                m.weights[l].cols()));
      g.biases.push_back(Eigen::VectorXd::Zero(m.biases[l].size()));
    }
    return g;
  }

  void SetZero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
  }

  GradBuffer& operator+=(const GradBuffer& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += other.weights[l];
      biases[l] += other.biases[l];
    }
    return *this;
  }

  GradBuffer& operator*=(double s) {
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
    return *this;
  }

  bool AllZero() const {
    for (const auto& w : weights) {
      if (!w.isZero(0.0)) return false;
    }
    for (const auto& b : biases) {
      if (!b.isZero(0.0)) return false;
    }
    return true;
  }
};

// Train-time inverted dropout on hidden activations. Each hidden unit is
// zeroed with probability `rate` and survivors are scaled by 1/(1-rate).
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;
};

// Everything Backward needs from the paired Forward call.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> inputs;     // h_l, the input of layer l
  std::vector<Eigen::MatrixXd> activated;  // act(z_l) before dropout
  std::vector<Eigen::MatrixXd> masks;      // empty when dropout is off
  bool empty() const { return inputs.empty(); }
  void clear() {
    inputs.clear();
    activated.clear();
    masks.clear();
  }
};

namespace internal {

// 1 - 2 / (exp(2z) + 1). Eigen vectorizes exp but not tanh for doubles;
// absolute error against std::tanh stays below 4e-16.
inline void TanhInPlace(Eigen::MatrixXd& z) {
  z = (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

inline void ApplyActivation(Activation a, const MlpModel& m,
                            Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kIdentity:
      break;
    case Activation::kTanh:
      TanhInPlace(z);
      break;
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kBoundedTanh:
      TanhInPlace(z);
      z = (z.array().colwise() * m.output_scale.array()).matrix();
      z.colwise() += m.output_offset;
      break;
  }
}

// grad <- grad * act'(z), written in terms of y = act(z).
inline void MultiplyActivationDerivative(Activation a, const MlpModel& m,
                                         const Eigen::MatrixXd& y,
                                         Eigen::MatrixXd& grad) {
  switch (a) {
    case Activation::kIdentity:
      break;
    case Activation::kTanh:
      grad.array() *= 1.0 - y.array().square();
      break;
    case Activation::kRelu:
      grad.array() *= (y.array() > 0.0).cast<double>();
      break;
    case Activation::kBoundedTanh: {
      // y = offset + scale * t  =>  dy/dz = scale * (1 - t^2).
      Eigen::ArrayXXd t =
          (y.colwise() - m.output_offset).array().colwise() /
          m.output_scale.array();
      Eigen::ArrayXXd d = (1.0 - t.square()).colwise() *
                          m.output_scale.array();
      grad.array() *= d;
      break;
    }
  }
}

}  // namespace internal

// Runs the network on a batch. Pass `trace` to enable Backward; pass
// `dropout` (rate > 0, non-null rng) to apply train-time dropout.
inline Eigen::MatrixXd Forward(const MlpModel& m, const Eigen::MatrixXd& batch,
                               ForwardTrace* trace = nullptr,
                               const Dropout* dropout = nullptr) {
  if (m.weights.empty()) throw DimensionError("model", "model has no layers");
  if (batch.rows() != m.input_dim()) {
    throw DimensionError(
        "layer 0", "expected input dim " + std::to_string(m.input_dim()) +
                       ", got " + std::to_string(batch.rows()));
  }
  const bool use_dropout =
      dropout != nullptr && dropout->rate > 0.0 && dropout->rng != nullptr;
  if (dropout != nullptr && (dropout->rate < 0.0 || dropout->rate >= 1.0)) {
    throw InvalidArgument("dropout rate must be in [0, 1)");
  }
  if (trace != nullptr) trace->clear();

  Eigen::MatrixXd h = batch;
  const int last = m.num_layers() - 1;
  for (int l = 0; l <= last; ++l) {
    if (m.weights[l].cols() != h.rows()) {
      throw DimensionError("layer " + std::to_string(l),
                           "weight columns do not match input rows");
    }
    Eigen::MatrixXd z = m.weights[l] * h;
    z.colwise() += m.biases[l];
    if (l < last) {
      internal::ApplyActivation(m.hidden_activation, m, z);
      if (trace != nullptr) {
        trace->inputs.push_back(std::move(h));
        trace->activated.push_back(z);
      }
      if (use_dropout) {
        const double keep = 1.0 - dropout->rate;
        // Masks come from a splitmix64 stream seeded by one engine draw.
        // Each 64-bit output yields two 32-bit uniforms; a unit is kept
        // when its uniform falls below keep * 2^32.
        const auto threshold = static_cast<std::uint64_t>(std::ldexp(keep, 32));
        const double scale = 1.0 / keep;
        std::uint64_t state = dropout->rng->engine()();
        Eigen::MatrixXd mask(z.rows(), z.cols());
        double* out = mask.data();
        const Eigen::Index n = mask.size();
        for (Eigen::Index i = 0; i < n; i += 2) {
          std::uint64_t bits = (state += 0x9e3779b97f4a7c15ULL);
          bits = (bits ^ (bits >> 30)) * 0xbf58476d1ce4e5b9ULL;
          bits = (bits ^ (bits >> 27)) * 0x94d049bb133111ebULL;
          bits ^= bits >> 31;
          out[i] = scale * static_cast<double>((bits & 0xffffffffULL) < threshold);
          if (i + 1 < n) out[i + 1] = scale * static_cast<double>((bits >> 32) < threshold);
        }
        z.array() *= mask.array();
        if (trace != nullptr) trace->masks.push_back(std::move(mask));
      }
      h = std::move(z);
    } else {
      internal::ApplyActivation(m.output_activation, m, z);
      if (trace != nullptr) {
        trace->inputs.push_back(std::move(h));
        trace->activated.push_back(z);
      }
      return z;
    }
  }
  return h;  // unreachable
}

inline Eigen::VectorXd ForwardOne(const MlpModel& m, const Eigen::VectorXd& x,
                                  ForwardTrace* trace = nullptr,
                                  const Dropout* dropout = nullptr) {
  return Forward(m, Eigen::MatrixXd(x), trace, dropout).col(0);
}

// Gradient of sum(upstream .* output) with respect to every parameter,
// summed over the batch. Optionally also returns the input gradient.
inline GradBuffer Backward(const MlpModel& m, const ForwardTrace& trace,
                           const Eigen::MatrixXd& upstream,
                           Eigen::MatrixXd* input_grad = nullptr) {
  if (trace.empty()) {
    throw Error("Backward called without a cached forward pass");
  }
  const int n = m.num_layers();
  if (static_cast<int>(trace.inputs.size()) != n ||
      static_cast<int>(trace.activated.size()) != n) {
    throw DimensionError("trace", "forward trace does not match model depth");
  }
  const Eigen::MatrixXd& out = trace.activated.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
    throw DimensionError("output", "upstream gradient shape mismatch");
  }
  const bool has_masks = !trace.masks.empty();

  GradBuffer g;
  g.weights.resize(n);
  g.biases.resize(n);
  Eigen::MatrixXd delta = upstream;
  internal::MultiplyActivationDerivative(m.output_activation, m, out, delta);
  for (int l = n - 1; l >= 0; --l) {
    g.weights[l].noalias() = delta * trace.inputs[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l == 0 && input_grad == nullptr) break;
    Eigen::MatrixXd back = m.weights[l].transpose() * delta;
    if (l == 0) {
      *input_grad = std::move(back);
      break;
    }
    if (has_masks) back.array() *= trace.masks[l - 1].array();
    internal::MultiplyActivationDerivative(m.hidden_activation, m,
                                           trace.activated[l - 1], back);
    delta = std::move(back);
  }
  return g;
}

// Parameters in a fixed order: for each layer, weights (column-major)
// then biases.
inline Eigen::VectorXd FlattenParams(const MlpModel& m) {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(m.num_params()));
  Eigen::Index at = 0;
  for (int l = 0; l < m.num_layers(); ++l) {
    flat.segment(at, m.weights[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(m.weights[l].data(),
                                          m.weights[l].size());
    at += m.weights[l].size();
    flat.segment(at, m.biases[l].size()) = m.biases[l];
    at += m.biases[l].size();
  }
  return flat;
}

// Reads num_params() values starting at `offset`; returns the next offset.
inline Eigen::Index UnflattenParams(MlpModel& m, const Eigen::VectorXd& flat,
                                    Eigen::Index offset = 0) {
  if (offset + static_cast<Eigen::Index>(m.num_params()) > flat.size()) {
    throw DimensionError("params", "flat vector too short");
  }
  for (int l = 0; l < m.num_layers(); ++l) {
    Eigen::Map<Eigen::VectorXd>(m.weights[l].data(), m.weights[l].size()) =
        flat.segment(offset, m.weights[l].size());
    offset += m.weights[l].size();
    m.biases[l] = flat.segment(offset, m.biases[l].size());
    offset += m.biases[l].size();
  }
  return offset;
}

inline Eigen::VectorXd FlattenGrads(const GradBuffer& g) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    n += g.weights[l].size() + g.biases[l].size();
  }
  Eigen::VectorXd flat(n);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    flat.segment(at, g.weights[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(g.weights[l].data(),
                                          g.weights[l].size());
    at += g.weights[l].size();
    flat.segment(at, g.biases[l].size()) = g.biases[l];
    at += g.biases[l].size();
  }
  return flat;
}

}  // namespace prefopt::nn
