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

// Deterministic policy network with actions squashed into the env's box,
// plus its JSON checkpoint (MLP + action-box metadata).

#include <cstdint>
#include <string>
#include <vector>

#include "prefopt/env/rollout.hpp"
#include "prefopt/nn/checkpoint.hpp"
#include "prefopt/nn/mlp.hpp"

namespace prefopt::dppo {

struct PolicyModel {
  nn::MlpModel net;  // state -> action, bounded-tanh output
  double dropout = 0.25;

  int state_dim() const { return net.input_dim(); }
  int action_dim() const { return net.output_dim(); }

  Eigen::VectorXd Act(const Eigen::VectorXd& state) const {
    return nn::ForwardOne(net, state);
  }

  // Eval-mode policy for rollouts (no dropout).
  env::Policy AsPolicy() const {
    return [net = net](const Eigen::VectorXd& s, Rng&) {
      return nn::ForwardOne(net, s);
    };
  }
};

inline PolicyModel MakePolicy(const env::EnvSpec& spec,
                              const std::vector<int>& hidden, double dropout,
                              Rng* rng) {
  std::vector<int> dims{spec.state_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(spec.action_dim);
  PolicyModel p;
  p.net = nn::MakeMlp(dims, nn::Activation::kTanh, nn::Activation::kIdentity, rng);
  nn::SetOutputBox(p.net, spec.action_low, spec.action_high);
  p.dropout = dropout;
  return p;
}

// Rollout seeds used for every policy evaluation, so checkpoints and methods
// are compared on the same start states.
inline constexpr std::uint64_t kEvalSeed = 500000;

struct EvalResult {
  double raw = 0.0;
  double normalized = 0.0;
};

inline EvalResult EvaluatePolicy(const env::EnvSpec& spec, const PolicyModel& p,
                                 const env::ReferenceReturns& ref, int episodes,
                                 std::uint64_t seed = kEvalSeed) {
  EvalResult r;
  r.raw = env::MeanReturn(env::Rollout(spec, p.AsPolicy(), seed, episodes, "eval"));
  r.normalized = env::NormalizedReturn(r.raw, ref.random, ref.expert);
  return r;
}

inline Json PolicyToJson(const PolicyModel& p, const std::string& env_name) {
  Json j;
  j["env"] = env_name;
  j["net"] = nn::ToJson(p.net);
  j["action_low"] = nn::VectorToJson(p.net.output_offset - p.net.output_scale);
  j["action_high"] = nn::VectorToJson(p.net.output_offset + p.net.output_scale);
  j["dropout"] = p.dropout;
  return j;
}

inline PolicyModel PolicyFromJson(const Json& j) {
  if (!j.contains("net")) throw IoError("policy checkpoint needs 'net'");
  PolicyModel p;
  p.net = nn::MlpFromJson(j["net"]);
  if (p.net.output_activation != nn::Activation::kBoundedTanh) {
    throw IoError("policy checkpoint must have a bounded_tanh output");
  }
  p.dropout = j.value("dropout", 0.0);
  return p;
}

}  // namespace prefopt::dppo
