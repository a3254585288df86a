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

// JSON Lines persistence:
//   trajectories.jsonl  {"id","env","behavior","states","actions","rewards"}
//   prefs.jsonl         {"pair_id","traj0","start0","traj1","start1","k","y","teacher"}
//   manifest.json       DatasetManifest fields
// One record per line. Doubles use shortest round-trip formatting, so a
// write/read cycle is exact.

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefopt/data/dataset.hpp"
#include "prefopt/data/sampling.hpp"
#include "prefopt/io.hpp"

namespace prefopt::data {

using OrderedJson = nlohmann::ordered_json;

namespace internal {

inline OrderedJson Rows(const std::vector<Eigen::VectorXd>& rows) {
  OrderedJson out = OrderedJson::array();
  for (const auto& r : rows) {
    OrderedJson row = OrderedJson::array();
    for (Eigen::Index i = 0; i < r.size(); ++i) row.push_back(r[i]);
    out.push_back(std::move(row));
  }
  return out;
}

inline std::vector<Eigen::VectorXd> ParseRows(const Json& j) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& row : j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = row[i].get<double>();
    }
    out.push_back(std::move(v));
  }
  return out;
}

template <typename F>
void ForEachLine(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      f(Json::parse(line));
    } catch (const Json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " +
                    e.what());
    }
  }
}

}  // namespace internal

inline std::string TrajectoryToLine(const Trajectory& t) {
  OrderedJson j;
  j["id"] = t.id;
  j["env"] = t.env;
  j["behavior"] = t.behavior;
  j["states"] = internal::Rows(t.states);
  j["actions"] = internal::Rows(t.actions);
  j["rewards"] = t.rewards;
  return j.dump();
}

inline Trajectory TrajectoryFromJson(const Json& j) {
  Trajectory t;
  t.id = j.at("id").get<std::string>();
  t.env = j.at("env").get<std::string>();
  t.behavior = j.at("behavior").get<std::string>();
  t.states = internal::ParseRows(j.at("states"));
  t.actions = internal::ParseRows(j.at("actions"));
  t.rewards = j.at("rewards").get<std::vector<double>>();
  if (t.states.size() != t.actions.size() + 1 ||
      t.rewards.size() != t.actions.size()) {
    throw IoError("trajectory " + t.id + " has inconsistent lengths");
  }
  return t;
}

inline void WriteTrajectories(const std::filesystem::path& path,
                              const Dataset& d) {
  std::string out;
  for (const auto& t : d.trajectories()) {
    out += TrajectoryToLine(t);
    out += '\n';
  }
  WriteFile(path, out);
}

inline Dataset ReadTrajectories(const std::filesystem::path& path) {
  Dataset d;
  internal::ForEachLine(path, [&](const Json& j) { d.Add(TrajectoryFromJson(j)); });
  return d;
}

inline std::string PreferenceToLine(const PreferenceTriple& p) {
  OrderedJson j;
  j["pair_id"] = p.pair_id;
  j["traj0"] = p.seg0.traj_id;
  j["start0"] = p.seg0.start;
  j["traj1"] = p.seg1.traj_id;
  j["start1"] = p.seg1.start;
  j["k"] = p.seg0.k;
  j["y"] = p.y;
  j["teacher"] = p.teacher;
  return j.dump();
}

inline PreferenceTriple PreferenceFromJson(const Json& j) {
  PreferenceTriple p;
  p.pair_id = j.at("pair_id").get<std::string>();
  const int k = j.at("k").get<int>();
  p.seg0 = {j.at("traj0").get<std::string>(), j.at("start0").get<int>(), k};
  p.seg1 = {j.at("traj1").get<std::string>(), j.at("start1").get<int>(), k};
  p.y = j.at("y").get<double>();
  p.teacher = j.at("teacher").get<std::string>();
  ValidateTriple(p);
  return p;
}

inline std::filesystem::path PreferenceManifestPath(
    const std::filesystem::path& prefs_path) {
  std::filesystem::path p = prefs_path;
  return p.replace_extension(".manifest.json");
}

// Writes the triples plus a sidecar "<name>.manifest.json" describing them.
inline void WritePreferences(const std::filesystem::path& path,
                             const std::vector<PreferenceTriple>& prefs,
                             const Json& header) {
  std::string out;
  for (const auto& p : prefs) {
    out += PreferenceToLine(p);
    out += '\n';
  }
  WriteFile(path, out);
  Json h = header;
  h["n_pairs"] = prefs.size();
  SaveJson(PreferenceManifestPath(path), h);
}

inline std::vector<PreferenceTriple> ReadPreferences(
    const std::filesystem::path& path) {
  std::vector<PreferenceTriple> out;
  internal::ForEachLine(path, [&](const Json& j) {
    out.push_back(PreferenceFromJson(j));
  });
  return out;
}

// Appends one record and flushes it to stable storage before returning.
inline void AppendPreference(const std::filesystem::path& path,
                             const PreferenceTriple& p) {
  ValidateTriple(p);
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  const std::string line = PreferenceToLine(p) + "\n";
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw IoError("cannot open " + path.string() + " for append");
  const ssize_t written = ::write(fd, line.data(), line.size());
  const bool ok = written == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
  ::close(fd);
  if (!ok) throw IoError("append failed for " + path.string());
}

inline Json ManifestToJson(const DatasetManifest& m) {
  Json j;
  j["env"] = m.env;
  j["n_trajectories"] = m.n_trajectories;
  j["mixture"] = m.mixture;
  j["R_random"] = m.r_random;
  j["R_expert"] = m.r_expert;
  j["seed"] = m.seed;
  return j;
}

inline DatasetManifest ManifestFromJson(const Json& j) {
  try {
    DatasetManifest m;
    m.env = j.at("env").get<std::string>();
    m.n_trajectories = j.at("n_trajectories").get<int>();
    m.mixture = j.at("mixture").get<std::map<std::string, double>>();
    m.r_random = j.at("R_random").get<double>();
    m.r_expert = j.at("R_expert").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    ValidateMixture(m.mixture);
    return m;
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace prefopt::data
