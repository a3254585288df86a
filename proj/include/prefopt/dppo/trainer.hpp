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

// Policy optimization by gradient ascent on the preference score, with
// segment pairs labeled by a frozen predictor.

#include <cstdint>
#include <string>
#include <vector>

#include "prefopt/data/sampling.hpp"
#include "prefopt/dppo/score.hpp"
#include "prefopt/nn/adam.hpp"

namespace prefopt::dppo {

struct DppoTrainConfig {
  double lambda = 0.5;
  int steps = 200000;  // N
  double learning_rate = 3e-4;
  int pairs_per_batch = 16;
  int k = 25;
  double dropout = 0.25;
  std::vector<int> hidden = {32, 32};
  int eval_every = 5000;
  int eval_episodes = 10;
  std::uint64_t seed = 0;
};

struct DppoLogRow {
  int step = 0;
  // Means over the steps since the previous row (step 0: the untrained
  // policy on one batch).
  double score = 0.0;
  double d_pref = 0.0;
  double d_unpref = 0.0;
  double eval_return_raw = 0.0;
  double eval_return_normalized = 0.0;
};

struct DppoTrainResult {
  PolicyModel policy;
  std::vector<DppoLogRow> log;
};

inline void ValidateConfig(const DppoTrainConfig& c) {
  CheckLambda(c.lambda);
  if (c.steps < 0) throw InvalidArgument("steps must be >= 0");
  if (c.pairs_per_batch < 1) throw InvalidArgument("pairs_per_batch must be >= 1");
  if (c.eval_every < 1 || c.eval_episodes < 1) {
    throw InvalidArgument("eval_every and eval_episodes must be >= 1");
  }
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) {
    throw InvalidArgument("dropout must be in [0, 1)");
  }
}

// `count` fresh pairs from `d`, pseudo-labeled through `table`.
inline std::vector<LabeledPair> SamplePseudoLabeled(
    const Dataset& d, const predictor::WindowScoreTable& table, int k, int count,
    Rng& rng) {
  std::vector<LabeledPair> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto [a, b] = data::SampleSegmentPair(d, k, rng);
    const double y = PseudoLabelFromProb(table.PrefProb(a, b));
    out.push_back({SegmentView(d, a), SegmentView(d, b), y});
  }
  return out;
}

inline DppoTrainResult TrainPolicy(const Dataset& d,
                                   const predictor::PredictorModel& predictor,
                                   const env::EnvSpec& spec,
                                   const env::ReferenceReturns& ref,
                                   const DppoTrainConfig& config) {
  ValidateConfig(config);
  if (d.empty()) throw InvalidArgument("dataset is empty");
  if (d.env() != spec.name) {
    throw InvalidArgument("dataset env " + d.env() + " does not match " + spec.name);
  }
  const predictor::WindowScoreTable table(predictor, d, config.k);

  Rng rng(config.seed);
  Rng dropout_rng(rng.NextSeed());
  DppoTrainResult result;
  result.policy = MakePolicy(spec, config.hidden, config.dropout, &rng);
  PolicyModel& policy = result.policy;
  nn::AdamState opt = nn::AdamState::For(policy.net, config.learning_rate);
  const nn::Dropout dropout{config.dropout, &dropout_rng};

  auto eval_row = [&](int step, double score, double dp, double du) {
    EvalResult e = EvaluatePolicy(spec, policy, ref, config.eval_episodes);
    result.log.push_back({step, score, dp, du, e.raw, e.normalized});
  };
  {
    auto batch = SamplePseudoLabeled(d, table, config.k, config.pairs_per_batch, rng);
    BatchScoreResult s = BatchScore(policy, batch, config.lambda, nullptr);
    eval_row(0, s.score, s.mean_d_preferred, s.mean_d_unpreferred);
  }

  double sum_score = 0.0, sum_dp = 0.0, sum_du = 0.0;
  int since = 0;
  for (int step = 1; step <= config.steps; ++step) {
    auto batch = SamplePseudoLabeled(d, table, config.k, config.pairs_per_batch, rng);
    nn::GradBuffer grads;
    BatchScoreResult s = BatchScore(policy, batch, config.lambda, &grads,
                                    config.dropout > 0.0 ? &dropout : nullptr);
    grads *= -1.0;  // Adam descends; we ascend on S
    nn::AdamStep(policy.net, grads, opt);
    sum_score += s.score;
    sum_dp += s.mean_d_preferred;
    sum_du += s.mean_d_unpreferred;
    ++since;
    if (step % config.eval_every == 0 || step == config.steps) {
      eval_row(step, sum_score / since, sum_dp / since, sum_du / since);
      sum_score = sum_dp = sum_du = 0.0;
      since = 0;
    }
  }
  return result;
}

// Fraction of `count` fresh pseudo-labeled pairs for which the policy is
// closer to the preferred segment (eval mode, no dropout).
inline double PreferredCloserFraction(const PolicyModel& policy, const Dataset& d,
                                      const predictor::PredictorModel& predictor,
                                      int k, int count, std::uint64_t seed) {
  const predictor::WindowScoreTable table(predictor, d, k);
  Rng rng(seed);
  int closer = 0;
  for (const auto& p : SamplePseudoLabeled(d, table, k, count, rng)) {
    const double d0 = SegmentDistance(policy, p.seg0);
    const double d1 = SegmentDistance(policy, p.seg1);
    closer += p.y == 0.0 ? d0 < d1 : d1 < d0;
  }
  return static_cast<double>(closer) / count;
}

inline std::string DppoLogCsv(const std::vector<DppoLogRow>& log) {
  std::string out = "step,score,d_pref,d_unpref,eval_return_raw,eval_return_normalized\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step,
                  r.score, r.d_pref, r.d_unpref, r.eval_return_raw,
                  r.eval_return_normalized);
    out += buf;
  }
  return out;
}

}  // namespace prefopt::dppo
