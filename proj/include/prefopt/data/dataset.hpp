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

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "prefopt/env/rollout.hpp"
#include "prefopt/error.hpp"

namespace prefopt::data {

using env::Trajectory;

// Window [start, start + k] of a stored trajectory: k + 1 transitions.
struct Segment {
  std::string traj_id;
  int start = 0;
  int k = 0;

  int length() const { return k + 1; }
  bool operator==(const Segment&) const = default;
};

// A collection of equal-horizon trajectories from one environment.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Trajectory> trajectories) {
    for (auto& t : trajectories) Add(std::move(t));
  }

  void Add(Trajectory t) {
    if (!trajectories_.empty()) {
      if (t.env != env()) {
        throw InvalidArgument("trajectory " + t.id + " is from env " + t.env +
                              ", dataset holds " + env());
      }
      if (t.horizon() != horizon()) {
        throw InvalidArgument("trajectory " + t.id + " has a different horizon");
      }
    }
    if (index_.count(t.id) != 0) {
      throw InvalidArgument("duplicate trajectory id " + t.id);
    }
    index_.emplace(t.id, trajectories_.size());
    trajectories_.push_back(std::move(t));
  }

  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  std::size_t size() const { return trajectories_.size(); }
  bool empty() const { return trajectories_.empty(); }
  const Trajectory& at(std::size_t i) const { return trajectories_.at(i); }

  const Trajectory& Get(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InvalidArgument("unknown trajectory " + id);
    return trajectories_[it->second];
  }
  bool Contains(const std::string& id) const { return index_.count(id) != 0; }

  std::string env() const {
    return trajectories_.empty() ? std::string() : trajectories_.front().env;
  }
  int horizon() const {
    return trajectories_.empty() ? 0 : trajectories_.front().horizon();
  }

  // Number of random draws made from this dataset by the samplers.
  std::size_t sample_draws() const { return sample_draws_; }
  void CountDraw() const { ++sample_draws_; }

 private:
  std::vector<Trajectory> trajectories_;
  std::unordered_map<std::string, std::size_t> index_;
  mutable std::size_t sample_draws_ = 0;
};

// A segment resolved against its trajectory. Only valid while the owning
// Dataset is alive.
class SegmentView {
 public:
  SegmentView(const Trajectory& traj, int start, int k)
      : traj_(&traj), start_(start), k_(k) {
    if (k < 0 || start < 0 || start + k > traj.horizon() - 1) {
      throw InvalidArgument("segment [" + std::to_string(start) + ", " +
                            std::to_string(start + k) + "] out of range for " +
                            traj.id);
    }
  }
  SegmentView(const Dataset& d, const Segment& s)
      : SegmentView(d.Get(s.traj_id), s.start, s.k) {}

  int k() const { return k_; }
  int start() const { return start_; }
  int length() const { return k_ + 1; }
  const Trajectory& trajectory() const { return *traj_; }
  Segment ref() const { return {traj_->id, start_, k_}; }

  const Eigen::VectorXd& state(int t) const { return traj_->states[start_ + t]; }
  const Eigen::VectorXd& action(int t) const { return traj_->actions[start_ + t]; }
  double reward(int t) const { return traj_->rewards[start_ + t]; }

  bool has_rewards() const {
    return static_cast<int>(traj_->rewards.size()) >= start_ + k_ + 1;
  }

  double Return() const {
    if (!has_rewards()) {
      throw InvalidArgument("segment of " + traj_->id + " has no rewards");
    }
    double r = 0.0;
    for (int t = 0; t <= k_; ++t) r += reward(t);
    return r;
  }

  // (state_dim + action_dim) x (k + 1), one column per transition.
  Eigen::MatrixXd StateActionMatrix() const {
    const Eigen::Index sd = state(0).size();
    const Eigen::Index ad = action(0).size();
    Eigen::MatrixXd m(sd + ad, length());
    for (int t = 0; t <= k_; ++t) {
      m.col(t).head(sd) = state(t);
      m.col(t).tail(ad) = action(t);
    }
    return m;
  }

 private:
  const Trajectory* traj_;
  int start_;
  int k_;
};

struct PreferenceTriple {
  std::string pair_id;
  Segment seg0;
  Segment seg1;
  double y = 0.5;  // 0: seg0 preferred, 1: seg1 preferred, 0.5: tie
  std::string teacher = "scripted";
};

inline bool IsValidLabel(double y) { return y == 0.0 || y == 0.5 || y == 1.0; }

inline void ValidateTriple(const PreferenceTriple& p) {
  if (!IsValidLabel(p.y)) {
    throw InvalidArgument("pair " + p.pair_id + ": label must be 0, 0.5 or 1");
  }
  if (p.seg0.k != p.seg1.k) {
    throw InvalidArgument("pair " + p.pair_id + ": segments differ in length");
  }
  if (p.teacher != "scripted" && p.teacher != "human") {
    throw InvalidArgument("pair " + p.pair_id + ": unknown teacher " + p.teacher);
  }
}

}  // namespace prefopt::data
