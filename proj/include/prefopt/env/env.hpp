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

// Deterministic toy control environments with exact ground-truth rewards.
//
//   pointmass2d  state (x, y, vx, vy), action (ax, ay) in [-1, 1]^2.
//                x' = x + v dt, v' = v + (a / mass) dt,
//                r  = -|pos - goal| - c |a|^2.
//                Starts at rest, position uniform in [-w, w]^2.
//   pendulum     state (theta, omega) with theta = 0 upright, wrapped to
//                [-pi, pi). Torque in [-2, 2].
//                omega' = omega + (g/l sin theta + u / (m l^2)) dt,
//                theta' = wrap(theta + omega dt),
//                r = -(theta^2 + 0.1 omega^2 + 0.001 u^2).
//                Starts near hanging down.

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "prefopt/error.hpp"
#include "prefopt/rng.hpp"

namespace prefopt::env {

enum class EnvKind { kPointmass2d, kPendulum };

struct EnvSpec {
  std::string name;
  EnvKind kind = EnvKind::kPointmass2d;
  int state_dim = 0;
  int action_dim = 0;
  Eigen::VectorXd action_low;
  Eigen::VectorXd action_high;
  int horizon = 100;
  std::map<std::string, double> params;

  double param(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) {
      throw InvalidArgument("env " + name + " has no parameter '" + key + "'");
    }
    return it->second;
  }

  void Validate() const {
    if (action_low.size() != action_dim || action_high.size() != action_dim) {
      throw DimensionError("env " + name, "action bounds size mismatch");
    }
    if ((action_low.array() >= action_high.array()).any()) {
      throw InvalidArgument("env " + name + ": action_low must be < action_high");
    }
    if (horizon < 2) throw InvalidArgument("env " + name + ": horizon < 2");
    if (!(param("dt") > 0.0)) throw InvalidArgument("env " + name + ": dt <= 0");
  }
};

inline EnvSpec MakePointmass2d() {
  EnvSpec s;
  s.name = "pointmass2d";
  s.kind = EnvKind::kPointmass2d;
  s.state_dim = 4;
  s.action_dim = 2;
  s.action_low = Eigen::Vector2d(-1.0, -1.0);
  s.action_high = Eigen::Vector2d(1.0, 1.0);
  s.horizon = 100;
  s.params = {{"dt", 0.05},       {"mass", 1.0},
              {"goal_x", 0.0},    {"goal_y", 0.0},
              {"action_cost", 0.05}, {"start_half_width", 2.0}};
  return s;
}

inline EnvSpec MakePendulum() {
  EnvSpec s;
  s.name = "pendulum";
  s.kind = EnvKind::kPendulum;
  s.state_dim = 2;
  s.action_dim = 1;
  s.action_low = Eigen::VectorXd::Constant(1, -2.0);
  s.action_high = Eigen::VectorXd::Constant(1, 2.0);
  s.horizon = 100;
  s.params = {{"dt", 0.05},     {"mass", 1.0},  {"length", 1.0},
              {"gravity", 9.81}, {"start_noise", 0.1}};
  return s;
}

inline EnvSpec MakeEnv(const std::string& name) {
  if (name == "pointmass2d") return MakePointmass2d();
  if (name == "pendulum") return MakePendulum();
  throw InvalidArgument("unknown environment '" + name + "'");
}

// Wraps an angle into [-pi, pi).
inline double WrapAngle(double theta) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = std::fmod(theta + std::numbers::pi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w - std::numbers::pi;
}

inline Eigen::VectorXd ClipAction(const EnvSpec& spec,
                                  const Eigen::VectorXd& action) {
  return action.cwiseMax(spec.action_low).cwiseMin(spec.action_high);
}

inline Eigen::VectorXd Reset(const EnvSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(spec.state_dim);
  switch (spec.kind) {
    case EnvKind::kPointmass2d: {
      const double w = spec.param("start_half_width");
      s[0] = rng.Uniform(-w, w);
      s[1] = rng.Uniform(-w, w);
      break;
    }
    case EnvKind::kPendulum: {
      const double n = spec.param("start_noise");
      s[0] = WrapAngle(std::numbers::pi + rng.Uniform(-n, n));
      s[1] = rng.Uniform(-n, n);
      break;
    }
  }
  return s;
}

struct StepResult {
  Eigen::VectorXd next_state;
  double reward = 0.0;
};

// Clips the action to the box, then advances one explicit Euler step.
// The reward is evaluated at the pre-step state and the clipped action.
inline StepResult Step(const EnvSpec& spec, const Eigen::VectorXd& state,
                       const Eigen::VectorXd& action) {
  if (state.size() != spec.state_dim) {
    throw DimensionError("env " + spec.name, "state dim mismatch");
  }
  if (action.size() != spec.action_dim) {
    throw DimensionError("env " + spec.name, "action dim mismatch");
  }
  if (!state.allFinite() || !action.allFinite()) {
    throw NonFiniteError("env " + spec.name + ": non-finite state or action");
  }
  const Eigen::VectorXd a = ClipAction(spec, action);
  const double dt = spec.param("dt");
  StepResult out;
  out.next_state.resize(spec.state_dim);
  switch (spec.kind) {
    case EnvKind::kPointmass2d: {
      const double inv_mass = 1.0 / spec.param("mass");
      const double dx = state[0] - spec.param("goal_x");
      const double dy = state[1] - spec.param("goal_y");
      out.reward = -std::hypot(dx, dy) - spec.param("action_cost") * a.squaredNorm();
      out.next_state[0] = state[0] + state[2] * dt;
      out.next_state[1] = state[1] + state[3] * dt;
      out.next_state[2] = state[2] + a[0] * inv_mass * dt;
      out.next_state[3] = state[3] + a[1] * inv_mass * dt;
      break;
    }
    case EnvKind::kPendulum: {
      const double theta = WrapAngle(state[0]);
      const double omega = state[1];
      const double g = spec.param("gravity");
      const double l = spec.param("length");
      const double m = spec.param("mass");
      out.reward = -(theta * theta + 0.1 * omega * omega + 0.001 * a.squaredNorm());
      const double accel = g / l * std::sin(theta) + a[0] / (m * l * l);
      out.next_state[0] = WrapAngle(theta + omega * dt);
      out.next_state[1] = omega + accel * dt;
      break;
    }
  }
  return out;
}

}  // namespace prefopt::env
