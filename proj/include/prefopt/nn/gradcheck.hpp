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

// Finite-difference gradient checking. Every loss in the library is
// certified against central differences through these helpers.

#include <algorithm>
#include <cmath>
#include <functional>

#include "prefopt/error.hpp"
#include "prefopt/nn/mlp.hpp"

namespace prefopt::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;   // at worst_index
  bool pass = false;
};

// Loss over a flat parameter vector. When `grad` is non-null the callee
// writes the analytic gradient into it.
using FlatLoss = std::function<double(const Eigen::VectorXd& params,
                                      Eigen::VectorXd* grad)>;

// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-6). The floor
// keeps coordinates whose true gradient is zero from failing on
// finite-difference rounding noise.
inline GradCheckReport CheckGradient(const FlatLoss& loss,
                                     const Eigen::VectorXd& params,
                                     double tolerance, double h = 1e-5) {
  Eigen::VectorXd analytic = Eigen::VectorXd::Zero(params.size());
  const double base = loss(params, &analytic);
  if (!std::isfinite(base)) throw NonFiniteError("loss is not finite");
  if (analytic.size() != params.size()) {
    throw DimensionError("gradcheck", "gradient length mismatch");
  }

  GradCheckReport report;
  Eigen::VectorXd probe = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    probe[i] = params[i] + h;
    const double up = loss(probe, nullptr);
    probe[i] = params[i] - h;
    const double down = loss(probe, nullptr);
    probe[i] = params[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteError("loss is not finite near coordinate " +
                           std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * h);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_error || report.worst_index < 0) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.analytic = analytic[i];
      report.numeric = numeric;
    }
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

// Convenience overload for a loss over a single model.
using ModelLoss =
    std::function<double(const MlpModel& model, GradBuffer* grads)>;

inline GradCheckReport CheckGradient(const ModelLoss& loss,
                                     const MlpModel& model, double tolerance,
                                     double h = 1e-5) {
  MlpModel scratch = model;
  FlatLoss flat = [&](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
    UnflattenParams(scratch, p);
    if (grad == nullptr) return loss(scratch, nullptr);
    GradBuffer g = GradBuffer::ZerosLike(scratch);
    const double value = loss(scratch, &g);
    *grad = FlattenGrads(g);
    return value;
  };
  return CheckGradient(flat, FlattenParams(model), tolerance, h);
}

}  // namespace prefopt::nn
