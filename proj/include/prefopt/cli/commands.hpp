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

// Subcommand dispatcher behind the `prefopt` binary.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prefopt/baselines/bc.hpp"
#include "prefopt/baselines/reward_model.hpp"
#include "prefopt/cli/config.hpp"
#include "prefopt/cli/label_server.hpp"
#include "prefopt/cli/report.hpp"
#include "prefopt/data/io.hpp"
#include "prefopt/data/sampling.hpp"
#include "prefopt/dppo/trainer.hpp"
#include "prefopt/predictor/predictor.hpp"

namespace prefopt::cli {

namespace fs = std::filesystem;

struct Command {
  std::string name;
  std::string help;
};

inline const std::vector<Command>& Commands() {
  static const std::vector<Command> c = {
      {"gen-data", "roll out reference policies into trajectories.jsonl + manifest.json"},
      {"gen-prefs", "label random segment pairs with the scripted teacher"},
      {"serve-label", "serve pairs to a human teacher over HTTP"},
      {"train-pref", "train the preference predictor"},
      {"train-policy", "train a policy with DPPO"},
      {"train-baseline", "train bc, pct-bc or bt-reward"},
      {"eval", "evaluate a policy checkpoint"},
      {"report", "render CSVs and SVG plots for a run directory"},
      {"sweep", "ablation over lambda, nu or m"},
  };
  return c;
}

inline std::string Usage() {
  std::string u = "usage: prefopt <command> [--config file.json] [--key value ...]\n\ncommands:\n";
  for (const auto& c : Commands()) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  %-15s %s\n", c.name.c_str(), c.help.c_str());
    u += buf;
  }
  u += "\nRun `prefopt <command> --help` for flags. PREFOPT_SEED sets the default seed.\n";
  return u;
}

// Held-out trajectories for smoothness profiles: fresh rollouts of the
// dataset's mixture, never seen during training.
inline constexpr std::uint64_t kHeldOutSeedOffset = 999;

struct DataBundle {
  data::Dataset dataset;
  data::DatasetManifest manifest;
  env::EnvSpec spec;
  env::ReferenceReturns ref;
};

// `path` is a gen-data output directory or a trajectories.jsonl inside one.
inline DataBundle LoadData(const std::string& path) {
  if (path.empty()) throw InvalidArgument("--data is required");
  fs::path dir = path;
  fs::path traj = dir / "trajectories.jsonl";
  if (!fs::is_directory(dir)) {
    traj = dir;
    dir = dir.parent_path();
  }
  DataBundle b;
  b.dataset = data::ReadTrajectories(traj);
  b.manifest = data::ManifestFromJson(LoadJson(dir / "manifest.json"));
  b.spec = env::MakeEnv(b.manifest.env);
  b.ref = {b.manifest.r_random, b.manifest.r_expert};
  return b;
}

inline std::vector<data::PreferenceTriple> LoadPrefs(const std::string& path) {
  if (path.empty()) throw InvalidArgument("--prefs is required");
  auto prefs = data::ReadPreferences(path);
  if (prefs.empty()) throw InvalidArgument("no preferences in " + path);
  return prefs;
}

inline predictor::PredictorModel LoadPredictor(const std::string& path) {
  if (path.empty()) throw InvalidArgument("--predictor is required");
  return predictor::PredictorFromJson(LoadJson(path));
}

inline std::string PredictorLogCsv(const std::vector<predictor::PredictorLogRow>& log) {
  std::string out = "step,cross_entropy,smoothness,heldout_accuracy\n";
  char buf[160];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.step, r.cross_entropy,
                  r.smoothness, r.heldout_accuracy);
    out += buf;
  }
  return out;
}

inline data::Dataset HeldOutTrajectories(const DataBundle& b, int count, std::uint64_t seed) {
  return data::GenerateOfflineDataset(b.spec, b.manifest.mixture, count,
                                      seed + kHeldOutSeedOffset)
      .first;
}

inline std::string SmoothnessCsv(const predictor::PredictorModel& model,
                                 const data::Dataset& trajs, int k) {
  std::string out = "traj_id,i,p\n";
  char buf[64];
  for (const auto& t : trajs.trajectories()) {
    const auto profile = predictor::SmoothnessProfile(model, t, k);
    for (std::size_t i = 0; i < profile.size(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%zu,%.17g\n", i, profile[i]);
      out += t.id + buf;
    }
  }
  return out;
}

inline std::string EvalJson(const dppo::EvalResult& e) {
  return Json{{"eval_return_raw", e.raw}, {"eval_return_normalized", e.normalized}}.dump(1) +
         "\n";
}

struct Io {
  std::ostream& out;
  std::ostream& err;
};

inline int GenData(const RunConfig& c, Io io) {
  const auto spec = env::MakeEnv(c.env);
  auto [d, manifest] = data::GenerateOfflineDataset(spec, ParseMixture(c.mix), c.n_traj, c.seed);
  data::WriteTrajectories(fs::path(c.out) / "trajectories.jsonl", d);
  SaveJson(fs::path(c.out) / "manifest.json", data::ManifestToJson(manifest));
  io.out << "wrote " << d.size() << " trajectories to " << c.out << "\n";
  return 0;
}

inline int GenPrefs(const RunConfig& c, Io io) {
  const DataBundle b = LoadData(c.data);
  const auto prefs = data::GenerateScriptedPreferences(b.dataset, c.n_prefs, c.k, c.seed);
  const fs::path path = fs::path(c.out) / "prefs.jsonl";
  data::WritePreferences(path, prefs,
                         {{"env", b.manifest.env}, {"k", c.k}, {"seed", c.seed},
                          {"teacher", "scripted"}});
  io.out << "wrote " << prefs.size() << " preferences to " << path.string() << "\n";
  return 0;
}

inline std::atomic<bool>& StopFlag() {
  static std::atomic<bool> stop{false};
  return stop;
}

inline int ServeLabel(const RunConfig& c, Io io) {
  const DataBundle b = LoadData(c.data);
  const fs::path path = fs::path(c.out) / "prefs.jsonl";
  LabelSession session(b.dataset, c.k, c.n_pairs, c.seed, path);
  StopFlag() = false;
  std::signal(SIGINT, [](int) { StopFlag() = true; });
  std::signal(SIGTERM, [](int) { StopFlag() = true; });
  ServeLabels(
      session, c.host, c.port, c.ui,
      [&](int port) {
        io.out << "labeling " << session.done() << "/" << session.target()
               << " on http://" << c.host << ":" << port << "/\n"
               << std::flush;
      },
      &StopFlag());
  io.out << "labeled " << session.done() << "/" << session.target() << " -> "
         << path.string() << "\n";
  return 0;
}

inline int TrainPref(const RunConfig& c, Io io) {
  const DataBundle b = LoadData(c.data);
  const auto prefs = LoadPrefs(c.prefs);
  const auto pc = ToPredictorConfig(c);
  const auto result = predictor::TrainPredictor(b.dataset, prefs, pc);
  const fs::path out = c.out;
  SaveJson(out / "predictor.json", predictor::PredictorToJson(result.model, pc));
  WriteFile(out / "predictor_metrics.csv", PredictorLogCsv(result.log));
  WriteFile(out / "smoothness.csv",
            SmoothnessCsv(result.model, HeldOutTrajectories(b, c.smooth_trajs, c.seed), c.k));
  if (!result.log.empty()) {
    io.out << "held-out accuracy " << result.log.back().heldout_accuracy << "\n";
  }
  return 0;
}

inline dppo::DppoTrainResult RunDppo(const RunConfig& c, const DataBundle& b,
                                     const predictor::PredictorModel& pred,
                                     const fs::path& out) {
  auto result = dppo::TrainPolicy(b.dataset, pred, b.spec, b.ref, ToDppoConfig(c));
  SaveJson(out / "policy.json", dppo::PolicyToJson(result.policy, b.spec.name));
  WriteFile(out / "metrics.csv", dppo::DppoLogCsv(result.log));
  return result;
}

inline int TrainPolicyCmd(const RunConfig& c, Io io) {
  const DataBundle b = LoadData(c.data);
  const auto result = RunDppo(c, b, LoadPredictor(c.predictor), c.out);
  const auto& last = result.log.back();
  io.out << "final normalized return " << last.eval_return_normalized << "\n";
  return 0;
}

inline int TrainBaseline(const RunConfig& c, Io io) {
  const DataBundle b = LoadData(c.data);
  const fs::path out = c.out;
  if (c.kind == "bt-reward") {
    const auto prefs = LoadPrefs(c.prefs);
    const auto model = baselines::TrainBtRewardModel(b.dataset, prefs, ToRewardConfig(c));
    SaveJson(out / "reward_model.json", {{"net", nn::ToJson(model.net)}});
    const auto rep = baselines::RewardFidelityReport(model, b.dataset, prefs, 5000, c.seed);
    WriteFile(out / "reward_scatter.csv", baselines::ScatterCsv(rep));
    SaveJson(out / "reward_fidelity.json", baselines::FidelitySummary(rep));
    io.out << "ranking accuracy " << rep.ranking_accuracy << ", pearson r "
           << rep.pearson_r << "\n";
    return 0;
  }
  dppo::PolicyModel policy;
  if (c.kind == "bc") {
    policy = baselines::BcTrain(b.dataset, b.spec, ToBcConfig(c));
  } else if (c.kind == "pct-bc") {
    baselines::TrajectoryKey key;
    if (c.filter_key == "predictor") {
      key = baselines::PredictorScoreKey(LoadPredictor(c.predictor));
    } else if (c.filter_key != "return") {
      throw InvalidArgument("--filter-key must be return or predictor");
    }
    policy = baselines::PctBcTrain(b.dataset, c.fraction, b.spec, ToBcConfig(c), key);
  } else {
    throw InvalidArgument("--kind must be bc, pct-bc or bt-reward, got '" + c.kind + "'");
  }
  SaveJson(out / "policy.json", dppo::PolicyToJson(policy, b.spec.name));
  const auto e = dppo::EvaluatePolicy(b.spec, policy, b.ref, c.eval_episodes);
  WriteFile(out / "baseline_eval.json", EvalJson(e));
  io.out << c.kind << " normalized return " << e.normalized << "\n";
  return 0;
}

inline int Eval(const RunConfig& c, const std::map<std::string, std::string>& given, Io io) {
  if (c.policy.empty()) throw InvalidArgument("--policy is required");
  const Json j = LoadJson(c.policy);
  const auto policy = dppo::PolicyFromJson(j);
  std::string env_name = given.count("env") ? c.env : j.value("env", c.env);
  env::ReferenceReturns ref;
  if (!c.data.empty()) {
    const DataBundle b = LoadData(c.data);
    if (!given.count("env")) env_name = b.manifest.env;
    ref = b.ref;
  } else {
    ref = env::MeasureReferenceReturns(env::MakeEnv(env_name), data::kReferenceSeed);
  }
  const auto spec = env::MakeEnv(env_name);
  if (policy.state_dim() != spec.state_dim || policy.action_dim() != spec.action_dim) {
    throw InvalidArgument("policy does not fit environment " + env_name);
  }
  const auto e = dppo::EvaluatePolicy(spec, policy, ref, c.episodes, c.seed);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "raw %.6f\nnormalized %.6f\n", e.raw, e.normalized);
  io.out << buf;
  return 0;
}

inline int Report(const RunConfig& c, Io io) {
  const auto r = EmitReport(c.out);
  for (const auto& w : r.written) io.out << "wrote report/" << w << ".svg\n";
  if (!r.missing.empty()) {
    std::string names;
    for (const auto& m : r.missing) names += (names.empty() ? "" : ", ") + m;
    io.err << "error: missing inputs in " << c.out << ": " << names << "\n";
    return 1;
  }
  return 0;
}

inline int Sweep(const RunConfig& c, Io io) {
  if (c.param != "lambda" && c.param != "nu" && c.param != "m") {
    throw InvalidArgument("--param must be lambda, nu or m");
  }
  const auto values = SplitList(c.values, ',');
  if (values.empty()) throw InvalidArgument("--values is empty");
  const DataBundle b = LoadData(c.data);
  std::optional<predictor::PredictorModel> shared;
  std::vector<data::PreferenceTriple> prefs;
  if (c.param == "lambda" && !c.predictor.empty()) {
    shared = LoadPredictor(c.predictor);
  } else {
    prefs = LoadPrefs(c.prefs);
  }
  std::string table = "param,value,final_eval_return_raw,final_eval_return_normalized\n";
  for (const auto& v : values) {
    RunConfig rc = c;
    FindField(c.param).set(rc, v);
    const fs::path dir = fs::path(c.out) / (c.param + "_" + v);
    predictor::PredictorModel pred;
    if (shared) {
      pred = *shared;
    } else {
      const auto pc = ToPredictorConfig(rc);
      pred = predictor::TrainPredictor(b.dataset, prefs, pc).model;
      SaveJson(dir / "predictor.json", predictor::PredictorToJson(pred, pc));
      if (c.param == "lambda") shared = pred;
    }
    const auto result = RunDppo(rc, b, pred, dir);
    const auto& last = result.log.back();
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g\n", c.param.c_str(), v.c_str(),
                  last.eval_return_raw, last.eval_return_normalized);
    table += buf;
    io.out << c.param << "=" << v << " normalized return " << last.eval_return_normalized
           << "\n";
  }
  WriteFile(fs::path(c.out) / "ablation.csv", table);
  return 0;
}

inline std::optional<std::string> EnvSeed() {
  const char* s = std::getenv("PREFOPT_SEED");
  if (s == nullptr) return std::nullopt;
  return std::string(s);
}

inline int RunCli(int argc, const char* const* argv, std::ostream& out = std::cout,
                  std::ostream& err = std::cerr) {
  Io io{out, err};
  const std::string name = argc > 1 ? argv[1] : "";
  if (name == "--help" || name == "-h" || name == "help") {
    out << Usage();
    return 0;
  }
  bool known = false;
  for (const auto& cmd : Commands()) known = known || cmd.name == name;
  if (!known) {
    if (!name.empty()) err << "unknown command '" << name << "'\n";
    err << Usage();
    return 2;
  }

  CLI::App app("prefopt " + name, "prefopt " + name);
  std::string config_path;
  app.add_option("--config", config_path, "flat JSON config file");
  std::map<std::string, std::string> flags;
  std::map<std::string, std::string> raw;
  for (const auto& f : ConfigFields()) {
    app.add_option(FlagName(f.key), raw[f.key], f.help);
  }
  try {
    std::vector<std::string> args(argv + 2, argv + argc);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  for (const auto& f : ConfigFields()) {
    if (app.count(FlagName(f.key)) > 0) flags[f.key] = raw[f.key];
  }

  try {
    std::map<std::string, std::string> file_values;
    if (!config_path.empty()) file_values = ConfigFileValues(LoadJson(config_path));
    const RunConfig c = ResolveConfig(file_values, flags, EnvSeed());
    std::map<std::string, std::string> given = file_values;
    given.insert(flags.begin(), flags.end());
    if (name == "gen-data") return GenData(c, io);
    if (name == "gen-prefs") return GenPrefs(c, io);
    if (name == "serve-label") return ServeLabel(c, io);
    if (name == "train-pref") return TrainPref(c, io);
    if (name == "train-policy") return TrainPolicyCmd(c, io);
    if (name == "train-baseline") return TrainBaseline(c, io);
    if (name == "eval") return Eval(c, given, io);
    if (name == "report") return Report(c, io);
    return Sweep(c, io);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << "\n";
    return 1;
  }
}

}  // namespace prefopt::cli
