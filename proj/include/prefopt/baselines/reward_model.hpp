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

// Bradley-Terry reward model: a per-step reward network whose summed
// segment rewards are fit to preference labels. Used as a diagnostic of how
// well preferences pin down the true reward.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "prefopt/data/sampling.hpp"
#include "prefopt/nn/adam.hpp"
#include "prefopt/predictor/predictor.hpp"

namespace prefopt::baselines {

using predictor::LabeledPair;

struct RewardModel {
  nn::MlpModel net;  // (state || action) -> scalar reward
};

struct RewardTrainConfig {
  int steps = 5000;
  int batch = 32;
  double learning_rate = 1e-4;
  int hidden_dim = 64;
  std::uint64_t seed = 0;
};

inline RewardModel MakeRewardModel(int state_dim, int action_dim, int hidden_dim,
                                   Rng* rng) {
  return {nn::MakeMlp({state_dim + action_dim, hidden_dim, hidden_dim, 1},
                      nn::Activation::kTanh, nn::Activation::kIdentity, rng)};
}

inline double PredictReward(const RewardModel& m, const Eigen::VectorXd& s,
                            const Eigen::VectorXd& a) {
  Eigen::VectorXd x(s.size() + a.size());
  x << s, a;
  return nn::ForwardOne(m.net, x)[0];
}

inline double PredictedReturn(const RewardModel& m, const data::SegmentView& seg) {
  return nn::Forward(m.net, seg.StateActionMatrix()).sum();
}

// Mean cross-entropy with P = sigmoid(sum r0 - sum r1).
inline double BtRewardLoss(const RewardModel& m, std::span<const LabeledPair> batch,
                           nn::GradBuffer* grads) {
  if (batch.empty()) throw InvalidArgument("reward batch is empty");
  std::vector<Eigen::Index> offsets;
  Eigen::Index total = 0;
  for (const auto& p : batch) {
    if (!data::IsValidLabel(p.y)) throw InvalidArgument("label must be 0, 0.5 or 1");
    offsets.push_back(total);
    total += p.seg0.length() + p.seg1.length();
  }
  Eigen::MatrixXd x(m.net.input_dim(), total);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    x.middleCols(offsets[i], batch[i].seg0.length()) = batch[i].seg0.StateActionMatrix();
    x.middleCols(offsets[i] + batch[i].seg0.length(), batch[i].seg1.length()) =
        batch[i].seg1.StateActionMatrix();
  }
  nn::ForwardTrace trace;
  Eigen::MatrixXd r = nn::Forward(m.net, x, grads ? &trace : nullptr);
  Eigen::MatrixXd dr(1, total);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int l0 = batch[i].seg0.length();
    const int l1 = batch[i].seg1.length();
    const double delta = r.middleCols(offsets[i], l0).sum() -
                         r.middleCols(offsets[i] + l0, l1).sum();
    const double y = batch[i].y;
    const double p01 = predictor::Sigmoid(delta);
    const double p10 = predictor::Sigmoid(-delta);
    loss -= inv_b * ((1.0 - y) * std::log(std::max(p01, predictor::kLogClamp)) +
                     y * std::log(std::max(p10, predictor::kLogClamp)));
    double d_delta = 0.0;
    if (p01 >= predictor::kLogClamp) d_delta -= (1.0 - y) * p10;
    if (p10 >= predictor::kLogClamp) d_delta += y * p01;
    dr.middleCols(offsets[i], l0).setConstant(inv_b * d_delta);
    dr.middleCols(offsets[i] + l0, l1).setConstant(-inv_b * d_delta);
  }
  if (grads != nullptr) *grads = nn::Backward(m.net, trace, dr);
  return loss;
}

// Trains on the non-held-out split of `prefs`.
inline RewardModel TrainBtRewardModel(const data::Dataset& d,
                                      std::span<const data::PreferenceTriple> prefs,
                                      const RewardTrainConfig& config) {
  std::vector<data::PreferenceTriple> train;
  for (const auto& p : prefs) {
    if (!predictor::IsHeldOut(p.pair_id)) train.push_back(p);
  }
  if (train.empty()) throw InvalidArgument("no training preferences");
  const std::vector<LabeledPair> pairs = predictor::ResolveTriples(d, train);
  Rng rng(config.seed);
  const auto& t0 = d.Get(train.front().seg0.traj_id);
  RewardModel m = MakeRewardModel(static_cast<int>(t0.states[0].size()),
                                  static_cast<int>(t0.actions[0].size()),
                                  config.hidden_dim, &rng);
  nn::AdamState opt = nn::AdamState::For(m.net, config.learning_rate);
  std::vector<LabeledPair> batch;
  for (int step = 0; step < config.steps; ++step) {
    batch.clear();
    for (int i = 0; i < config.batch; ++i) {
      batch.push_back(pairs[static_cast<std::size_t>(
          rng.UniformInt(0, static_cast<int>(pairs.size()) - 1))]);
    }
    nn::GradBuffer grads;
    BtRewardLoss(m, batch, &grads);
    nn::AdamStep(m.net, grads, opt);
  }
  return m;
}

// Supervised regression onto the true per-step reward. Serves as the
// positive control for the fidelity report.
inline RewardModel RegressRewards(const data::Dataset& d, const RewardTrainConfig& config) {
  if (d.empty()) throw InvalidArgument("dataset is empty");
  Rng rng(config.seed);
  const auto& t0 = d.at(0);
  RewardModel m = MakeRewardModel(static_cast<int>(t0.states[0].size()),
                                  static_cast<int>(t0.actions[0].size()),
                                  config.hidden_dim, &rng);
  nn::AdamState opt = nn::AdamState::For(m.net, config.learning_rate);
  const int h = d.horizon();
  const int total = static_cast<int>(d.size()) * h;
  const int batch = std::max(config.batch, 1);
  Eigen::MatrixXd x(m.net.input_dim(), batch);
  Eigen::MatrixXd y(1, batch);
  for (int step = 0; step < config.steps; ++step) {
    for (int i = 0; i < batch; ++i) {
      const int idx = rng.UniformInt(0, total - 1);
      const auto& t = d.at(static_cast<std::size_t>(idx / h));
      x.col(i) << t.states[idx % h], t.actions[idx % h];
      y(0, i) = t.rewards[idx % h];
    }
    nn::ForwardTrace trace;
    Eigen::MatrixXd diff = nn::Forward(m.net, x, &trace) - y;
    nn::AdamStep(m.net, nn::Backward(m.net, trace, diff * (2.0 / batch)), opt);
  }
  return m;
}

struct FidelityReport {
  std::vector<std::pair<double, double>> scatter;  // (predicted, true)
  double pearson_r = 0.0;
  bool degenerate = false;  // a constant series; r reported as 0
  double ranking_accuracy = 0.0;
  int ranked_pairs = 0;
};

inline std::pair<double, bool> PearsonR(const std::vector<std::pair<double, double>>& xy) {
  const double n = static_cast<double>(xy.size());
  if (xy.size() < 2) return {0.0, true};
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : xy) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& [x, y] : xy) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {sxy / std::sqrt(sxx * syy), false};
}

// Per-step scatter over `samples` uniformly drawn transitions, and the
// fraction of held-out triples (by pair id) whose predicted segment-return
// order matches the true-return order. Triples with equal true returns are
// skipped.
inline FidelityReport RewardFidelityReport(const RewardModel& m, const data::Dataset& d,
                                           std::span<const data::PreferenceTriple> prefs,
                                           int samples = 5000, std::uint64_t seed = 0) {
  if (d.empty()) throw InvalidArgument("dataset is empty");
  FidelityReport rep;
  Rng rng(seed);
  const int h = d.horizon();
  for (int i = 0; i < samples; ++i) {
    const auto& t = d.at(static_cast<std::size_t>(
        rng.UniformInt(0, static_cast<int>(d.size()) - 1)));
    const int step = rng.UniformInt(0, h - 1);
    rep.scatter.emplace_back(PredictReward(m, t.states[step], t.actions[step]),
                             t.rewards[step]);
  }
  std::tie(rep.pearson_r, rep.degenerate) = PearsonR(rep.scatter);

  int correct = 0;
  for (const auto& p : prefs) {
    if (!predictor::IsHeldOut(p.pair_id)) continue;
    data::SegmentView a(d, p.seg0), b(d, p.seg1);
    const double true_label = data::ScriptedLabel(a, b);
    if (true_label == 0.5) continue;
    const double pa = PredictedReturn(m, a);
    const double pb = PredictedReturn(m, b);
    const double predicted = pa > pb ? 0.0 : pa < pb ? 1.0 : 0.5;
    correct += predicted == true_label;
    ++rep.ranked_pairs;
  }
  rep.ranking_accuracy =
      rep.ranked_pairs == 0 ? 0.0 : static_cast<double>(correct) / rep.ranked_pairs;
  return rep;
}

inline std::string ScatterCsv(const FidelityReport& rep) {
  std::string out = "pred_reward,true_reward\n";
  char buf[96];
  for (const auto& [x, y] : rep.scatter) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", x, y);
    out += buf;
  }
  return out;
}

inline Json FidelitySummary(const FidelityReport& rep) {
  return {{"pearson_r", rep.pearson_r},
          {"ranking_accuracy", rep.ranking_accuracy},
          {"degenerate", rep.degenerate}};
}

}  // namespace prefopt::baselines
