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

// Behavior cloning and %BC (cloning only the best trajectories).

#include <cstdint>
#include <functional>
#include <vector>

#include "prefopt/data/sampling.hpp"
#include "prefopt/dppo/policy.hpp"
#include "prefopt/nn/adam.hpp"
#include "prefopt/predictor/predictor.hpp"

namespace prefopt::baselines {

using data::Dataset;
using dppo::PolicyModel;

struct BcTrainConfig {
  int steps = 50000;
  int batch = 256;  // transitions per step, sampled uniformly
  double learning_rate = 3e-4;
  double dropout = 0.25;
  std::vector<int> hidden = {32, 32};
  std::uint64_t seed = 0;
};

// Mean over columns of |pi(s) - a|^2. `grads` receives d loss / d params.
inline double BcLoss(const PolicyModel& policy, const Eigen::MatrixXd& states,
                     const Eigen::MatrixXd& actions, nn::GradBuffer* grads,
                     const nn::Dropout* dropout = nullptr) {
  if (states.cols() == 0 || states.cols() != actions.cols()) {
    throw DimensionError("bc_loss", "states and actions must be non-empty and aligned");
  }
  nn::ForwardTrace trace;
  Eigen::MatrixXd diff =
      nn::Forward(policy.net, states, grads ? &trace : nullptr, dropout) - actions;
  const double n = static_cast<double>(states.cols());
  if (grads != nullptr) *grads = nn::Backward(policy.net, trace, diff * (2.0 / n));
  return diff.colwise().squaredNorm().sum() / n;
}

inline PolicyModel BcTrain(const Dataset& d, const env::EnvSpec& spec,
                           const BcTrainConfig& config) {
  if (d.empty()) throw InvalidArgument("dataset is empty");
  if (config.steps < 0 || config.batch < 1) {
    throw InvalidArgument("steps must be >= 0 and batch >= 1");
  }
  Rng rng(config.seed);
  Rng dropout_rng(rng.NextSeed());
  PolicyModel policy = dppo::MakePolicy(spec, config.hidden, config.dropout, &rng);
  nn::AdamState opt = nn::AdamState::For(policy.net, config.learning_rate);
  const nn::Dropout dropout{config.dropout, &dropout_rng};

  const int h = d.horizon();
  const int total = static_cast<int>(d.size()) * h;
  Eigen::MatrixXd states(spec.state_dim, config.batch);
  Eigen::MatrixXd actions(spec.action_dim, config.batch);
  for (int step = 0; step < config.steps; ++step) {
    for (int i = 0; i < config.batch; ++i) {
      const int idx = rng.UniformInt(0, total - 1);
      const auto& t = d.at(static_cast<std::size_t>(idx / h));
      states.col(i) = t.states[idx % h];
      actions.col(i) = t.actions[idx % h];
    }
    nn::GradBuffer grads;
    BcLoss(policy, states, actions, &grads, config.dropout > 0.0 ? &dropout : nullptr);
    nn::AdamStep(policy.net, grads, opt);
  }
  return policy;
}

using TrajectoryKey = std::function<double(const data::Trajectory&)>;

// Ranks trajectories by the predictor's score of the whole trajectory.
inline TrajectoryKey PredictorScoreKey(const predictor::PredictorModel& model) {
  return [model](const data::Trajectory& t) {
    return predictor::SegmentScore(model, data::SegmentView(t, 0, t.horizon() - 1));
  };
}

// BC on the top `fraction` of trajectories, ranked by return unless `key`
// is given.
inline PolicyModel PctBcTrain(const Dataset& d, double fraction,
                              const env::EnvSpec& spec, const BcTrainConfig& config,
                              const TrajectoryKey& key = nullptr) {
  return BcTrain(data::TopFractionFilter(d, fraction, key), spec, config);
}

}  // namespace prefopt::baselines
