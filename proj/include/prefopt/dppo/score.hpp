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

// Policy-segment distance and the contrastive preference score.
//
//   d_sa(pi, s, a)  = sqrt(|pi(s) - a|^2 + eps)
//   d(pi, seg)      = mean over the k+1 transitions of d_sa
//   s(d_i, d_j; l)  = log[exp(-d_i) / (exp(-d_i) + exp(-l d_j))]
//                   = -softplus(d_i - l d_j)
//   S               = mean over triples of (1-y) s(d0, d1) + y s(d1, d0)
//
// l < 1 makes the score drop when both distances grow together, which keeps
// the policy near the data.

#include <cmath>
#include <span>
#include <vector>

#include "prefopt/data/dataset.hpp"
#include "prefopt/dppo/policy.hpp"
#include "prefopt/error.hpp"
#include "prefopt/predictor/predictor.hpp"

namespace prefopt::dppo {

using data::Dataset;
using data::SegmentView;
using predictor::LabeledPair;

inline constexpr double kDistanceEpsilon = 1e-12;

inline double Softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double TransitionDistance(const PolicyModel& policy,
                                 const Eigen::VectorXd& state,
                                 const Eigen::VectorXd& action) {
  if (action.size() != policy.action_dim()) {
    throw DimensionError("transition_distance", "action dim mismatch");
  }
  return std::sqrt((policy.Act(state) - action).squaredNorm() +
                   kDistanceEpsilon);
}

inline double SegmentDistance(const PolicyModel& policy, const SegmentView& seg) {
  Eigen::MatrixXd states(policy.state_dim(), seg.length());
  Eigen::MatrixXd actions(policy.action_dim(), seg.length());
  for (int t = 0; t < seg.length(); ++t) {
    if (seg.state(t).size() != policy.state_dim() ||
        seg.action(t).size() != policy.action_dim()) {
      throw DimensionError("segment_distance", "segment dims do not match policy");
    }
    states.col(t) = seg.state(t);
    actions.col(t) = seg.action(t);
  }
  Eigen::MatrixXd diff = nn::Forward(policy.net, states) - actions;
  return ((diff.colwise().squaredNorm().array() + kDistanceEpsilon).sqrt()).mean();
}

// Score of preferring the segment at distance d_i over the one at d_j.
inline double PairScoreFromDistances(double d_i, double d_j, double lambda) {
  return -Softplus(d_i - lambda * d_j);
}

inline double PairScore(const PolicyModel& policy, const SegmentView& seg_i,
                        const SegmentView& seg_j, double lambda) {
  return PairScoreFromDistances(SegmentDistance(policy, seg_i),
                                SegmentDistance(policy, seg_j), lambda);
}

struct BatchScoreResult {
  double score = 0.0;
  // Per-triple distances to the ŷ-preferred / ŷ-unpreferred segment,
  // averaged. Ties contribute to neither.
  double mean_d_preferred = 0.0;
  double mean_d_unpreferred = 0.0;
};

inline void CheckLambda(double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw InvalidArgument("lambda must be in (0, 1]");
  }
}

// S over the batch. When `grads` is non-null it receives dS/dparams
// (ascent direction). `dropout` applies train-time dropout to the policy.
inline BatchScoreResult BatchScore(const PolicyModel& policy,
                                   std::span<const LabeledPair> triples,
                                   double lambda, nn::GradBuffer* grads,
                                   const nn::Dropout* dropout = nullptr) {
  if (triples.empty()) throw InvalidArgument("score batch is empty");
  CheckLambda(lambda);
  const int sd = policy.state_dim();
  const int ad = policy.action_dim();

  // Pack every transition of every segment into one batch.
  std::vector<Eigen::Index> offsets;
  std::vector<int> lengths;
  Eigen::Index total = 0;
  for (const auto& t : triples) {
    if (!data::IsValidLabel(t.y)) throw InvalidArgument("label must be 0, 0.5 or 1");
    for (const SegmentView* s : {&t.seg0, &t.seg1}) {
      offsets.push_back(total);
      lengths.push_back(s->length());
      total += s->length();
    }
  }
  Eigen::MatrixXd states(sd, total);
  Eigen::MatrixXd actions(ad, total);
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const SegmentView* segs[] = {&triples[i].seg0, &triples[i].seg1};
    for (int side = 0; side < 2; ++side) {
      const SegmentView& s = *segs[side];
      const Eigen::Index off = offsets[2 * i + side];
      for (int t = 0; t < s.length(); ++t) {
        if (s.state(t).size() != sd || s.action(t).size() != ad) {
          throw DimensionError("batch_score", "segment dims do not match policy");
        }
        states.col(off + t) = s.state(t);
        actions.col(off + t) = s.action(t);
      }
    }
  }

  nn::ForwardTrace trace;
  Eigen::MatrixXd diff =
      nn::Forward(policy.net, states, grads ? &trace : nullptr, dropout) - actions;
  Eigen::ArrayXd dist =
      (diff.colwise().squaredNorm().array() + kDistanceEpsilon).sqrt().transpose();

  const std::size_t n_segs = offsets.size();
  std::vector<double> seg_d(n_segs);
  for (std::size_t i = 0; i < n_segs; ++i) {
    seg_d[i] = dist.segment(offsets[i], lengths[i]).mean();
  }

  BatchScoreResult out;
  std::vector<double> d_seg_grad(n_segs, 0.0);  // dS / d(segment distance)
  const double inv_b = 1.0 / static_cast<double>(triples.size());
  int decided = 0;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const double y = triples[i].y;
    const double d0 = seg_d[2 * i];
    const double d1 = seg_d[2 * i + 1];
    // s(d0, d1) and s(d1, d0), with ds/dd_i = -sig(d_i - l d_j),
    // ds/dd_j = l sig(d_i - l d_j).
    const double sig01 = predictor::Sigmoid(d0 - lambda * d1);
    const double sig10 = predictor::Sigmoid(d1 - lambda * d0);
    out.score += inv_b * ((1.0 - y) * PairScoreFromDistances(d0, d1, lambda) +
                          y * PairScoreFromDistances(d1, d0, lambda));
    d_seg_grad[2 * i] += inv_b * ((1.0 - y) * -sig01 + y * lambda * sig10);
    d_seg_grad[2 * i + 1] += inv_b * ((1.0 - y) * lambda * sig01 - y * sig10);
    if (y != 0.5) {
      out.mean_d_preferred += y == 0.0 ? d0 : d1;
      out.mean_d_unpreferred += y == 0.0 ? d1 : d0;
      ++decided;
    }
  }
  if (decided > 0) {
    out.mean_d_preferred /= decided;
    out.mean_d_unpreferred /= decided;
  }

  if (grads != nullptr) {
    Eigen::MatrixXd upstream(ad, total);
    for (std::size_t i = 0; i < n_segs; ++i) {
      const double scale = d_seg_grad[i] / lengths[i];
      for (int t = 0; t < lengths[i]; ++t) {
        const Eigen::Index c = offsets[i] + t;
        upstream.col(c) = diff.col(c) * (scale / dist[c]);
      }
    }
    *grads = nn::Backward(policy.net, trace, upstream);
  }
  return out;
}

// Recomputes S by evaluating the defining formulas literally (plain exp and
// log, one state at a time) in long double, and compares with BatchScore.
// Intended for small batches (<= 8 triples, k <= 4).
inline bool ScoreOracleCheck(const PolicyModel& policy,
                             std::span<const LabeledPair> triples, double lambda,
                             double tolerance = 1e-9) {
  using Real = long double;
  auto distance = [&](const SegmentView& seg) {
    Real sum = 0.0L;
    for (int t = 0; t < seg.length(); ++t) {
      const Eigen::VectorXd a = policy.Act(seg.state(t));
      Real sq = 0.0L;
      for (Eigen::Index j = 0; j < a.size(); ++j) {
        const Real diff = static_cast<Real>(a[j]) - static_cast<Real>(seg.action(t)[j]);
        sq += diff * diff;
      }
      sum += std::sqrt(sq + static_cast<Real>(kDistanceEpsilon));
    }
    return sum / static_cast<Real>(seg.length());
  };
  auto score = [&](Real di, Real dj) {
    const Real lam = static_cast<Real>(lambda);
    return std::log(std::exp(-di) / (std::exp(-di) + std::exp(-lam * dj)));
  };
  Real total = 0.0L;
  for (const auto& t : triples) {
    const Real d0 = distance(t.seg0);
    const Real d1 = distance(t.seg1);
    const Real y = static_cast<Real>(t.y);
    total += (1.0L - y) * score(d0, d1) + y * score(d1, d0);
  }
  total /= static_cast<Real>(triples.size());
  const double batched = BatchScore(policy, triples, lambda, nullptr).score;
  return std::abs(static_cast<Real>(batched) - total) <= tolerance;
}

// Hard label from the predictor: 0 iff P[seg0 > seg1] > 0.5, else 1.
inline double PseudoLabelFromProb(double prob) { return prob > 0.5 ? 0.0 : 1.0; }

inline double PseudoLabel(const predictor::PredictorModel& model,
                          const SegmentView& seg0, const SegmentView& seg1) {
  return PseudoLabelFromProb(predictor::PrefProb(model, seg0, seg1));
}

}  // namespace prefopt::dppo
