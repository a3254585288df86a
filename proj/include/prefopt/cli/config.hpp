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

// Run configuration shared by every subcommand. Values resolve as
// defaults < PREFOPT_SEED (seed only) < flat JSON config file < flags.

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "prefopt/baselines/bc.hpp"
#include "prefopt/baselines/reward_model.hpp"
#include "prefopt/dppo/trainer.hpp"
#include "prefopt/error.hpp"
#include "prefopt/io.hpp"
#include "prefopt/predictor/predictor.hpp"

namespace prefopt::cli {

struct RunConfig {
  std::string env = "pointmass2d";
  std::string data;       // dataset directory
  std::string prefs;      // preference JSONL
  std::string predictor;  // predictor checkpoint
  std::string policy;     // policy checkpoint
  std::string out = "runs/default";
  std::uint64_t seed = 0;

  int n_traj = 300;
  std::string mix = "expert:0.2,medium:0.4,random:0.4";
  int n_prefs = 500;
  int k = 25;

  double nu = 1.0;
  int m = 5;
  int pred_steps = 5000;
  int labeled_batch = 32;
  int smooth_batch = 32;
  double pred_lr = 1e-4;
  int pred_hidden = 64;
  int embed_dim = 64;
  int smooth_trajs = 5;

  double lambda = 0.5;
  int policy_steps = 200000;
  double policy_lr = 3e-4;
  int pairs_per_batch = 16;
  double dropout = 0.25;
  int eval_every = 5000;
  int eval_episodes = 10;

  std::string kind = "bc";  // bc | pct-bc | bt-reward
  int bc_steps = 50000;
  int bc_batch = 256;
  double bc_lr = 3e-4;
  double fraction = 0.1;
  std::string filter_key = "return";  // return | predictor
  int reward_steps = 5000;
  int reward_batch = 32;
  double reward_lr = 1e-4;

  int episodes = 10;

  int n_pairs = 20;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string ui;

  std::string param = "lambda";
  std::string values = "0.1,0.5,1.0";
};

struct ConfigField {
  std::string key;  // JSON key; the flag is --key with '_' as '-'
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

namespace internal {

template <typename T>
T ParseValue(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  in >> v;
  const bool negative_unsigned =
      std::is_unsigned_v<T> && text.find('-') != std::string::npos;
  if (in.fail() || !in.eof() || negative_unsigned) {
    throw InvalidArgument("bad value for --" + key + ": '" + text + "'");
  }
  return v;
}

template <>
inline std::string ParseValue<std::string>(const std::string&, const std::string& text) {
  return text;
}

template <typename T>
ConfigField Field(std::string key, T RunConfig::*member, std::string help) {
  ConfigField f;
  f.key = key;
  f.help = std::move(help);
  f.set = [member, key](RunConfig& c, const std::string& text) {
    c.*member = ParseValue<T>(key, text);
  };
  f.get = [member](const RunConfig& c) {
    if constexpr (std::is_same_v<T, std::string>) {
      return c.*member;
    } else {
      std::ostringstream out;
      out.precision(17);
      out << c.*member;
      return out.str();
    }
  };
  return f;
}

}  // namespace internal

inline const std::vector<ConfigField>& ConfigFields() {
  using internal::Field;
  static const std::vector<ConfigField> fields = {
      Field("env", &RunConfig::env, "environment: pointmass2d | pendulum"),
      Field("data", &RunConfig::data, "dataset directory"),
      Field("prefs", &RunConfig::prefs, "preference JSONL file"),
      Field("predictor", &RunConfig::predictor, "predictor checkpoint"),
      Field("policy", &RunConfig::policy, "policy checkpoint"),
      Field("out", &RunConfig::out, "output directory or file"),
      Field("seed", &RunConfig::seed, "top-level seed"),
      Field("n_traj", &RunConfig::n_traj, "trajectories to generate"),
      Field("mix", &RunConfig::mix, "behavior mixture, e.g. expert:0.2,random:0.8"),
      Field("n_prefs", &RunConfig::n_prefs, "scripted preferences to generate"),
      Field("k", &RunConfig::k, "segment covers k+1 transitions"),
      Field("nu", &RunConfig::nu, "smoothness weight"),
      Field("m", &RunConfig::m, "shift scale of overlapping pairs"),
      Field("pred_steps", &RunConfig::pred_steps, "predictor Adam steps"),
      Field("labeled_batch", &RunConfig::labeled_batch, "labeled triples per step"),
      Field("smooth_batch", &RunConfig::smooth_batch, "overlapping pairs per step"),
      Field("pred_lr", &RunConfig::pred_lr, "predictor learning rate"),
      Field("pred_hidden", &RunConfig::pred_hidden, "predictor hidden width"),
      Field("embed_dim", &RunConfig::embed_dim, "predictor embedding width"),
      Field("smooth_trajs", &RunConfig::smooth_trajs, "trajectories in the smoothness profile"),
      Field("lambda", &RunConfig::lambda, "conservativeness factor in (0, 1]"),
      Field("policy_steps", &RunConfig::policy_steps, "policy Adam steps"),
      Field("policy_lr", &RunConfig::policy_lr, "policy learning rate"),
      Field("pairs_per_batch", &RunConfig::pairs_per_batch, "segment pairs per policy step"),
      Field("dropout", &RunConfig::dropout, "policy dropout rate"),
      Field("eval_every", &RunConfig::eval_every, "policy steps between evaluations"),
      Field("eval_episodes", &RunConfig::eval_episodes, "episodes per evaluation"),
      Field("kind", &RunConfig::kind, "baseline: bc | pct-bc | bt-reward"),
      Field("bc_steps", &RunConfig::bc_steps, "BC Adam steps"),
      Field("bc_batch", &RunConfig::bc_batch, "BC transitions per step"),
      Field("bc_lr", &RunConfig::bc_lr, "BC learning rate"),
      Field("fraction", &RunConfig::fraction, "%BC kept fraction"),
      Field("filter_key", &RunConfig::filter_key, "%BC ranking: return | predictor"),
      Field("reward_steps", &RunConfig::reward_steps, "reward model Adam steps"),
      Field("reward_batch", &RunConfig::reward_batch, "reward model triples per step"),
      Field("reward_lr", &RunConfig::reward_lr, "reward model learning rate"),
      Field("episodes", &RunConfig::episodes, "evaluation episodes"),
      Field("n_pairs", &RunConfig::n_pairs, "pairs to label"),
      Field("port", &RunConfig::port, "HTTP port"),
      Field("host", &RunConfig::host, "HTTP bind address"),
      Field("ui", &RunConfig::ui, "static UI directory"),
      Field("param", &RunConfig::param, "sweep parameter: lambda | nu | m"),
      Field("values", &RunConfig::values, "comma-separated sweep values"),
  };
  return fields;
}

inline const ConfigField& FindField(const std::string& key) {
  for (const auto& f : ConfigFields()) {
    if (f.key == key) return f;
  }
  throw InvalidArgument("unknown config key '" + key + "'");
}

inline std::string FlagName(const std::string& key) {
  std::string flag = "--" + key;
  for (char& c : flag) {
    if (c == '_') c = '-';
  }
  return flag;
}

// A flat JSON object; nested values are rejected.
inline std::map<std::string, std::string> ConfigFileValues(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("config file must hold a JSON object");
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : j.items()) {
    FindField(key);
    if (value.is_string()) {
      out[key] = value.get<std::string>();
    } else if (value.is_number_integer() || value.is_number_unsigned() ||
               value.is_number_float() || value.is_boolean()) {
      out[key] = value.dump();
    } else {
      throw InvalidArgument("config key '" + key + "' must be a scalar");
    }
  }
  return out;
}

inline RunConfig ResolveConfig(const std::map<std::string, std::string>& file_values,
                               const std::map<std::string, std::string>& flag_values,
                               const std::optional<std::string>& env_seed) {
  RunConfig c;
  if (env_seed && !env_seed->empty()) FindField("seed").set(c, *env_seed);
  for (const auto& [k, v] : file_values) FindField(k).set(c, v);
  for (const auto& [k, v] : flag_values) FindField(k).set(c, v);
  return c;
}

inline Json ConfigToJson(const RunConfig& c) {
  Json j = Json::object();
  for (const auto& f : ConfigFields()) j[f.key] = f.get(c);
  return j;
}

inline std::vector<std::string> SplitList(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "expert:0.2,random:0.8" -> {expert: 0.2, random: 0.8}
inline std::map<std::string, double> ParseMixture(const std::string& text) {
  std::map<std::string, double> mix;
  for (const auto& part : SplitList(text, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw InvalidArgument("mixture entry '" + part + "' needs tag:weight");
    }
    mix[part.substr(0, colon)] =
        internal::ParseValue<double>("mix", part.substr(colon + 1));
  }
  data::ValidateMixture(mix);
  return mix;
}

inline predictor::PredictorTrainConfig ToPredictorConfig(const RunConfig& c) {
  predictor::PredictorTrainConfig p;
  p.nu = c.nu;
  p.m = c.m;
  p.steps = c.pred_steps;
  p.labeled_batch = c.labeled_batch;
  p.smooth_batch = c.smooth_batch;
  p.learning_rate = c.pred_lr;
  p.hidden_dim = c.pred_hidden;
  p.embed_dim = c.embed_dim;
  p.seed = c.seed;
  return p;
}

inline dppo::DppoTrainConfig ToDppoConfig(const RunConfig& c) {
  dppo::DppoTrainConfig d;
  d.lambda = c.lambda;
  d.steps = c.policy_steps;
  d.learning_rate = c.policy_lr;
  d.pairs_per_batch = c.pairs_per_batch;
  d.k = c.k;
  d.dropout = c.dropout;
  d.eval_every = c.eval_every;
  d.eval_episodes = c.eval_episodes;
  d.seed = c.seed;
  return d;
}

inline baselines::BcTrainConfig ToBcConfig(const RunConfig& c) {
  baselines::BcTrainConfig b;
  b.steps = c.bc_steps;
  b.batch = c.bc_batch;
  b.learning_rate = c.bc_lr;
  b.dropout = c.dropout;
  b.seed = c.seed;
  return b;
}

inline baselines::RewardTrainConfig ToRewardConfig(const RunConfig& c) {
  baselines::RewardTrainConfig r;
  r.steps = c.reward_steps;
  r.batch = c.reward_batch;
  r.learning_rate = c.reward_lr;
  r.seed = c.seed;
  return r;
}

}  // namespace prefopt::cli
