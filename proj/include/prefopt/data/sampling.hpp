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

// Segment samplers, the scripted teacher, and dataset generation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "prefopt/data/dataset.hpp"
#include "prefopt/env/rollout.hpp"

namespace prefopt::data {

using SegmentPair = std::pair<Segment, Segment>;

namespace internal {

inline void CheckWindow(const Dataset& d, int k) {
  if (d.empty()) throw InvalidArgument("dataset is empty");
  if (k < 0 || k + 1 > d.horizon()) {
    throw InvalidArgument("segment length k+1 = " + std::to_string(k + 1) +
                          " exceeds horizon " + std::to_string(d.horizon()));
  }
}

inline Segment DrawSegment(const Dataset& d, int k, Rng& rng) {
  d.CountDraw();
  const auto& t = d.at(static_cast<std::size_t>(
      rng.UniformInt(0, static_cast<int>(d.size()) - 1)));
  return {t.id, rng.UniformInt(0, d.horizon() - 1 - k), k};
}

}  // namespace internal

// Two trajectories uniformly with replacement, then a uniform window start
// in [0, H-1-k] within each.
inline SegmentPair SampleSegmentPair(const Dataset& d, int k, Rng& rng) {
  internal::CheckWindow(d, k);
  Segment a = internal::DrawSegment(d, k, rng);
  Segment b = internal::DrawSegment(d, k, rng);
  return {std::move(a), std::move(b)};
}

// A window and a copy of it shifted by alpha = round(N(0, m^2)) within the
// same trajectory. The shifted start is clamped to the valid range; a zero
// net shift is redrawn up to 10 times, after which a unit shift in the
// direction of the last alpha is used.
inline SegmentPair SampleOverlappingPair(const Dataset& d, int k, int m,
                                         Rng& rng) {
  internal::CheckWindow(d, k);
  if (m < 1) throw InvalidArgument("overlap scale m must be >= 1");
  const int max_start = d.horizon() - 1 - k;
  if (max_start < 1) {
    throw InvalidArgument("k = " + std::to_string(k) +
                          " leaves no room for a shifted window");
  }
  Segment base = internal::DrawSegment(d, k, rng);
  int shift = 0;
  double alpha = 0.0;
  for (int attempt = 0; attempt <= 10 && shift == 0; ++attempt) {
    alpha = std::round(rng.Normal(0.0, static_cast<double>(m)));
    const int target = std::clamp(base.start + static_cast<int>(alpha), 0,
                                  max_start);
    shift = target - base.start;
  }
  if (shift == 0) {
    shift = alpha < 0.0 ? -1 : 1;
    if (base.start + shift < 0 || base.start + shift > max_start) shift = -shift;
  }
  Segment shifted{base.traj_id, base.start + shift, k};
  return {std::move(base), std::move(shifted)};
}

// Prefers the segment with the larger ground-truth return; exact ties give
// 0.5.
inline double ScriptedLabel(const SegmentView& seg0, const SegmentView& seg1) {
  const double r0 = seg0.Return();
  const double r1 = seg1.Return();
  if (r0 > r1) return 0.0;
  if (r0 < r1) return 1.0;
  return 0.5;
}

inline std::vector<PreferenceTriple> GenerateScriptedPreferences(
    const Dataset& d, int n_pairs, int k, std::uint64_t seed) {
  if (n_pairs < 0) throw InvalidArgument("n_pairs must be >= 0");
  std::vector<PreferenceTriple> out;
  if (n_pairs == 0) return out;
  Rng rng(seed);
  out.reserve(static_cast<std::size_t>(n_pairs));
  for (int i = 0; i < n_pairs; ++i) {
    auto [a, b] = SampleSegmentPair(d, k, rng);
    PreferenceTriple p;
    p.pair_id = "s" + std::to_string(seed) + "-" + std::to_string(i);
    p.y = ScriptedLabel(SegmentView(d, a), SegmentView(d, b));
    p.seg0 = std::move(a);
    p.seg1 = std::move(b);
    p.teacher = "scripted";
    out.push_back(std::move(p));
  }
  return out;
}

// Keeps the top ceil(fraction * n) trajectories by return (or `key`). Ties
// are broken by trajectory id in lexicographic order. Survivors keep their
// original relative order, so fraction 1 is the identity.
inline Dataset TopFractionFilter(
    const Dataset& d, double fraction,
    const std::function<double(const Trajectory&)>& key = nullptr) {
  if (d.empty()) throw InvalidArgument("cannot filter an empty dataset");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("fraction must be in (0, 1]");
  }
  std::vector<std::pair<double, const Trajectory*>> ranked;
  for (const auto& t : d.trajectories()) {
    ranked.emplace_back(key ? key(t) : t.Return(), &t);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->id < b.second->id;
  });
  const auto keep = static_cast<std::size_t>(std::ceil(
      fraction * static_cast<double>(d.size()) - 1e-9));
  std::set<const Trajectory*> chosen;
  for (std::size_t i = 0; i < std::max<std::size_t>(keep, 1); ++i) {
    chosen.insert(ranked[i].second);
  }
  std::vector<Trajectory> kept;
  for (const auto& t : d.trajectories()) {
    if (chosen.count(&t) > 0) kept.push_back(t);
  }
  return Dataset(std::move(kept));
}

struct DatasetManifest {
  std::string env;
  int n_trajectories = 0;
  std::map<std::string, double> mixture;
  double r_random = 0.0;
  double r_expert = 0.0;
  std::uint64_t seed = 0;
};

inline void ValidateMixture(const std::map<std::string, double>& mixture) {
  if (mixture.empty()) throw InvalidArgument("mixture is empty");
  double total = 0.0;
  for (const auto& [tag, f] : mixture) {
    if (tag != "expert" && tag != "medium" && tag != "random") {
      throw InvalidArgument("unknown behavior tag '" + tag + "'");
    }
    if (!(f >= 0.0)) throw InvalidArgument("mixture fraction must be >= 0");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("mixture fractions must sum to 1");
  }
}

// Largest-remainder apportionment of n over the mixture. Remainder ties go
// to the tag that sorts first.
inline std::map<std::string, int> ApportionMixture(
    const std::map<std::string, double>& mixture, int n) {
  ValidateMixture(mixture);
  std::map<std::string, int> counts;
  std::vector<std::pair<double, std::string>> remainders;
  int assigned = 0;
  for (const auto& [tag, f] : mixture) {
    const double exact = f * static_cast<double>(n);
    // Guard against 0.4 * 300 = 119.99999999999999 style artifacts.
    const int whole = static_cast<int>(std::floor(exact + 1e-9));
    counts[tag] = whole;
    assigned += whole;
    remainders.emplace_back(exact - whole, tag);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; assigned < n; ++i, ++assigned) {
    counts[remainders[static_cast<std::size_t>(i) % remainders.size()].second]++;
  }
  return counts;
}

// Seed used for the reference-return measurement, so every dataset of an
// environment shares the same normalization constants.
inline constexpr std::uint64_t kReferenceSeed = 900000;

// Rolls out the reference policies according to `mixture`. Trajectory ids
// are "<env>-<tag>-<index>"; episode seeds are derived from `seed`.
inline std::pair<Dataset, DatasetManifest> GenerateOfflineDataset(
    const env::EnvSpec& spec, const std::map<std::string, double>& mixture,
    int n_traj, std::uint64_t seed) {
  if (n_traj < 0) throw InvalidArgument("n_traj must be >= 0");
  const auto counts = ApportionMixture(mixture, n_traj);
  Rng seeder(seed);
  Dataset d;
  for (const auto& [tag, count] : counts) {
    const std::uint64_t base = seeder.NextSeed() >> 16;
    auto trajs = env::Rollout(spec, env::ReferencePolicy(spec, tag), base,
                              count, tag);
    for (int i = 0; i < count; ++i) {
      auto& t = trajs[static_cast<std::size_t>(i)];
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%04d", i);
      t.id = spec.name + "-" + tag + "-" + buf;
      d.Add(std::move(t));
    }
  }
  const auto ref = env::MeasureReferenceReturns(spec, kReferenceSeed);
  DatasetManifest m;
  m.env = spec.name;
  m.n_trajectories = n_traj;
  m.mixture = mixture;
  m.r_random = ref.random;
  m.r_expert = ref.expert;
  m.seed = seed;
  return {std::move(d), std::move(m)};
}

}  // namespace prefopt::data
