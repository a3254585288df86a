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

// Episode rollouts, the scripted reference policies that populate offline
// datasets, and return normalization.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "prefopt/env/env.hpp"

namespace prefopt::env {

// A state -> action map. The rng is the per-episode stream; deterministic
// policies ignore it.
using Policy =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& state, Rng& rng)>;

struct Trajectory {
  std::string id;
  std::string env;
  std::string behavior;  // expert | medium | random | policy
  std::vector<Eigen::VectorXd> states;   // horizon + 1
  std::vector<Eigen::VectorXd> actions;  // horizon, already clipped
  std::vector<double> rewards;           // horizon

  int horizon() const { return static_cast<int>(actions.size()); }
  double Return() const {
    return std::accumulate(rewards.begin(), rewards.end(), 0.0);
  }
};

// One episode from an explicit start state. Policy noise comes from
// Rng(seed).
inline Trajectory RunEpisode(const EnvSpec& spec, const Policy& policy,
                             Eigen::VectorXd start, std::uint64_t seed,
                             const std::string& behavior = "policy") {
  Rng rng(seed);
  Trajectory t;
  t.id = spec.name + "-" + std::to_string(seed);
  t.env = spec.name;
  t.behavior = behavior;
  Eigen::VectorXd s = std::move(start);
  t.states.reserve(static_cast<std::size_t>(spec.horizon) + 1);
  t.actions.reserve(static_cast<std::size_t>(spec.horizon));
  t.rewards.reserve(static_cast<std::size_t>(spec.horizon));
  t.states.push_back(s);
  for (int step = 0; step < spec.horizon; ++step) {
    Eigen::VectorXd a = policy(s, rng);
    if (a.size() != spec.action_dim) {
      throw DimensionError("policy", "expected action dim " +
                                         std::to_string(spec.action_dim) +
                                         ", got " + std::to_string(a.size()));
    }
    a = ClipAction(spec, a);
    StepResult r = Step(spec, s, a);
    t.actions.push_back(a);
    t.rewards.push_back(r.reward);
    s = std::move(r.next_state);
    t.states.push_back(s);
  }
  return t;
}

// Runs `episodes` episodes. Episode i resets with seed + i and draws policy
// noise from Rng(seed + i), so episodes are independent of each other.
inline std::vector<Trajectory> Rollout(const EnvSpec& spec,
                                       const Policy& policy,
                                       std::uint64_t seed, int episodes,
                                       const std::string& behavior = "policy") {
  spec.Validate();
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(std::max(episodes, 0)));
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t episode_seed = seed + static_cast<std::uint64_t>(e);
    out.push_back(RunEpisode(spec, policy, Reset(spec, episode_seed),
                             episode_seed, behavior));
  }
  return out;
}

inline double MeanReturn(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& t : trajs) total += t.Return();
  return total / static_cast<double>(trajs.size());
}

namespace internal {

inline Eigen::VectorXd PointmassExpert(const EnvSpec& spec,
                                       const Eigen::VectorXd& s) {
  constexpr double kP = 2.0;
  constexpr double kD = 2.2;
  Eigen::VectorXd a(2);
  a[0] = -kP * (s[0] - spec.param("goal_x")) - kD * s[2];
  a[1] = -kP * (s[1] - spec.param("goal_y")) - kD * s[3];
  return ClipAction(spec, a);
}

// Energy pumping far from upright, PD capture near it.
inline Eigen::VectorXd PendulumExpert(const EnvSpec& spec,
                                      const Eigen::VectorXd& s) {
  const double theta = WrapAngle(s[0]);
  const double omega = s[1];
  const double g_over_l = spec.param("gravity") / spec.param("length");
  const double ml2 = spec.param("mass") * spec.param("length") *
                     spec.param("length");
  Eigen::VectorXd u(1);
  if (std::abs(theta) < 0.5) {
    u[0] = ml2 * (-(g_over_l + 6.0) * theta - 2.5 * omega);
  } else {
    const double energy = 0.5 * omega * omega + g_over_l * (std::cos(theta) - 1.0);
    u[0] = -1.5 * energy * omega;
    if (std::abs(omega) < 1e-3) u[0] = spec.action_high[0];
  }
  return ClipAction(spec, u);
}

inline Eigen::VectorXd Expert(const EnvSpec& spec, const Eigen::VectorXd& s) {
  switch (spec.kind) {
    case EnvKind::kPointmass2d: return PointmassExpert(spec, s);
    case EnvKind::kPendulum: return PendulumExpert(spec, s);
  }
  return Eigen::VectorXd::Zero(spec.action_dim);
}

}  // namespace internal

// expert: hand-tuned controller (PD to goal, or energy pumping + PD capture).
// medium: expert plus Gaussian noise with sigma = 30% of the action range.
// random: uniform over the action box.
inline Policy ReferencePolicy(const EnvSpec& spec, const std::string& quality) {
  if (quality == "expert") {
    return [spec](const Eigen::VectorXd& s, Rng&) {
      return internal::Expert(spec, s);
    };
  }
  if (quality == "medium") {
    return [spec](const Eigen::VectorXd& s, Rng& rng) {
      Eigen::VectorXd a = internal::Expert(spec, s);
      for (int i = 0; i < spec.action_dim; ++i) {
        const double sigma = 0.3 * (spec.action_high[i] - spec.action_low[i]);
        a[i] += rng.Normal(0.0, sigma);
      }
      return ClipAction(spec, a);
    };
  }
  if (quality == "random") {
    return [spec](const Eigen::VectorXd&, Rng& rng) {
      Eigen::VectorXd a(spec.action_dim);
      for (int i = 0; i < spec.action_dim; ++i) {
        a[i] = rng.Uniform(spec.action_low[i], spec.action_high[i]);
      }
      return a;
    };
  }
  throw InvalidArgument("unknown policy quality '" + quality + "'");
}

// 100 * (R - R_random) / (R_expert - R_random).
inline double NormalizedReturn(double ret, double random_return,
                               double expert_return) {
  if (!(expert_return > random_return)) {
    throw InvalidArgument("normalized return needs R_expert > R_random");
  }
  return 100.0 * (ret - random_return) / (expert_return - random_return);
}

struct ReferenceReturns {
  double random = 0.0;
  double expert = 0.0;
};

// Mean returns of the random and expert reference policies; these anchor
// the 0..100 normalization.
inline ReferenceReturns MeasureReferenceReturns(const EnvSpec& spec,
                                                std::uint64_t seed,
                                                int episodes = 50) {
  ReferenceReturns r;
  r.random = MeanReturn(
      Rollout(spec, ReferencePolicy(spec, "random"), seed, episodes));
  r.expert = MeanReturn(
      Rollout(spec, ReferencePolicy(spec, "expert"), seed, episodes));
  return r;
}

}  // namespace prefopt::env
