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

#include <cmath>
#include <string>

#include "prefopt/error.hpp"
#include "prefopt/nn/mlp.hpp"

namespace prefopt::nn {

struct AdamState {
  GradBuffer m;  // first moment
  GradBuffer v;  // second moment
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState For(const MlpModel& model, double learning_rate) {
    AdamState s;
    s.m = GradBuffer::ZerosLike(model);
    s.v = GradBuffer::ZerosLike(model);
    s.learning_rate = learning_rate;
    return s;
  }
};

namespace internal {

template <typename Derived>
void CheckFinite(const Eigen::MatrixBase<Derived>& x, const std::string& path) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!std::isfinite(x(i, j))) {
        throw NonFiniteError("non-finite gradient at " + path + "(" +
                             std::to_string(i) + "," + std::to_string(j) +
                             ")");
      }
    }
  }
}

}  // namespace internal

// One bias-corrected Adam descent step. Gradients are validated before
// anything is modified, so a throw leaves model and state untouched.
inline void AdamStep(MlpModel& model, const GradBuffer& grads,
                     AdamState& state) {
  const int n = model.num_layers();
  if (static_cast<int>(grads.weights.size()) != n ||
      static_cast<int>(state.m.weights.size()) != n) {
    throw DimensionError("adam", "layer count mismatch");
  }
  for (int l = 0; l < n; ++l) {
    const std::string layer = "layer " + std::to_string(l);
    if (grads.weights[l].rows() != model.weights[l].rows() ||
        grads.weights[l].cols() != model.weights[l].cols() ||
        grads.biases[l].size() != model.biases[l].size()) {
      throw DimensionError(layer, "gradient shape mismatch");
    }
    internal::CheckFinite(grads.weights[l], layer + " weights");
    internal::CheckFinite(grads.biases[l], layer + " biases");
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double lr = state.learning_rate;
  const double eps = state.epsilon;

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (int l = 0; l < n; ++l) {
    update(model.weights[l], grads.weights[l], state.m.weights[l],
           state.v.weights[l]);
    update(model.biases[l], grads.biases[l], state.m.biases[l],
           state.v.biases[l]);
  }
}

}  // namespace prefopt::nn
