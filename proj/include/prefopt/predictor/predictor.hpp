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

// Preference predictor P[seg0 > seg1]. Each transition (s || a) is embedded
// by the encoder, embeddings are mean-pooled over the window, and the head
// maps the pooled vector to a scalar segment score g. Two segments compare
// through sigmoid(g0 - g1).
//
// Training minimizes
//   -E[(1-y) log P(s0 > s1) + y log P(s1 > s0)]      over labeled triples
//   + nu * E[(P(s > s') - 0.5)^2]                    over overlapping pairs
// where s' is s shifted by a few steps inside the same trajectory.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "prefopt/data/dataset.hpp"
#include "prefopt/data/sampling.hpp"
#include "prefopt/nn/adam.hpp"
#include "prefopt/nn/checkpoint.hpp"
#include "prefopt/nn/mlp.hpp"

namespace prefopt::predictor {

using data::Dataset;
using data::PreferenceTriple;
using data::Segment;
using data::SegmentView;

struct PredictorModel {
  nn::MlpModel encoder;  // (state || action) -> embedding
  nn::MlpModel head;     // pooled embedding -> scalar score
};

struct PredictorTrainConfig {
  double nu = 1.0;     // smoothness weight
  int m = 5;           // shift scale for overlapping pairs
  int steps = 5000;    // M
  int labeled_batch = 32;
  int smooth_batch = 32;
  double learning_rate = 1e-4;
  int hidden_dim = 64;
  int embed_dim = 64;
  int log_every = 100;
  std::uint64_t seed = 0;
};

inline PredictorModel MakePredictor(int state_dim, int action_dim,
                                    const PredictorTrainConfig& config,
                                    Rng* rng) {
  PredictorModel p;
  p.encoder = nn::MakeMlp({state_dim + action_dim, config.hidden_dim,
                           config.embed_dim},
                          nn::Activation::kTanh, nn::Activation::kIdentity, rng);
  p.head = nn::MakeMlp({config.embed_dim, config.hidden_dim, 1},
                       nn::Activation::kTanh, nn::Activation::kIdentity, rng);
  return p;
}

inline double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace internal {

// Columns of all segments side by side, plus the column offset of each.
struct PackedSegments {
  Eigen::MatrixXd inputs;
  std::vector<Eigen::Index> offsets;
  std::vector<int> lengths;
};

inline PackedSegments Pack(std::span<const SegmentView> segs, int input_dim) {
  PackedSegments p;
  Eigen::Index total = 0;
  for (const auto& s : segs) {
    p.offsets.push_back(total);
    p.lengths.push_back(s.length());
    total += s.length();
  }
  p.inputs.resize(input_dim, total);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const SegmentView& s = segs[i];
    const Eigen::Index sd = s.state(0).size();
    const Eigen::Index ad = s.action(0).size();
    if (sd + ad != input_dim) {
      throw DimensionError("predictor encoder",
                           "segment state+action dim does not match encoder");
    }
    for (int t = 0; t < s.length(); ++t) {
      auto col = p.inputs.col(p.offsets[i] + t);
      col.head(sd) = s.state(t);
      col.tail(ad) = s.action(t);
    }
  }
  return p;
}

struct ScoreTrace {
  PackedSegments packed;
  nn::ForwardTrace encoder;
  nn::ForwardTrace head;
  Eigen::MatrixXd scores;  // 1 x n_segments
};

inline Eigen::MatrixXd ScoreSegments(const PredictorModel& model,
                                     std::span<const SegmentView> segs,
                                     ScoreTrace* trace) {
  PackedSegments packed = Pack(segs, model.encoder.input_dim());
  nn::ForwardTrace enc_trace;
  Eigen::MatrixXd emb = nn::Forward(model.encoder, packed.inputs,
                                    trace ? &enc_trace : nullptr);
  Eigen::MatrixXd pooled(emb.rows(), static_cast<Eigen::Index>(segs.size()));
  for (std::size_t i = 0; i < segs.size(); ++i) {
    pooled.col(static_cast<Eigen::Index>(i)) =
        emb.middleCols(packed.offsets[i], packed.lengths[i]).rowwise().mean();
  }
  nn::ForwardTrace head_trace;
  Eigen::MatrixXd scores =
      nn::Forward(model.head, pooled, trace ? &head_trace : nullptr);
  if (trace != nullptr) {
    trace->packed = std::move(packed);
    trace->encoder = std::move(enc_trace);
    trace->head = std::move(head_trace);
    trace->scores = scores;
  }
  return scores;
}

}  // namespace internal

inline double SegmentScore(const PredictorModel& model, const SegmentView& seg) {
  return internal::ScoreSegments(model, std::span(&seg, 1), nullptr)(0, 0);
}

inline double PrefProb(const PredictorModel& model, const SegmentView& seg0,
                       const SegmentView& seg1) {
  if (seg0.k() != seg1.k()) {
    throw InvalidArgument("segments compared with different lengths");
  }
  const SegmentView segs[] = {seg0, seg1};
  Eigen::MatrixXd g = internal::ScoreSegments(model, segs, nullptr);
  return Sigmoid(g(0, 0) - g(0, 1));
}

struct LabeledPair {
  SegmentView seg0;
  SegmentView seg1;
  double y;
};

using SegmentViewPair = std::pair<SegmentView, SegmentView>;

struct PredictorGrads {
  nn::GradBuffer encoder;
  nn::GradBuffer head;
};

struct LossTerms {
  double total = 0.0;
  double cross_entropy = 0.0;
  double smoothness = 0.0;
};

inline constexpr double kLogClamp = 1e-12;

// Cross-entropy over `labeled` plus nu times the mean squared deviation of
// P from 0.5 over `smooth`. When `grads` is non-null it receives the
// gradient of `total`.
inline LossTerms PredictorLoss(const PredictorModel& model,
                               std::span<const LabeledPair> labeled,
                               std::span<const SegmentViewPair> smooth,
                               double nu, PredictorGrads* grads) {
  if (labeled.empty()) throw InvalidArgument("labeled batch is empty");
  if (nu < 0.0) throw InvalidArgument("nu must be >= 0");
  if (nu > 0.0 && smooth.empty()) {
    throw InvalidArgument("nu > 0 requires a non-empty smoothness batch");
  }
  const bool use_smooth = nu > 0.0;
  std::vector<SegmentView> segs;
  segs.reserve(2 * (labeled.size() + smooth.size()));
  for (const auto& p : labeled) {
    segs.push_back(p.seg0);
    segs.push_back(p.seg1);
  }
  if (use_smooth) {
    for (const auto& [a, b] : smooth) {
      segs.push_back(a);
      segs.push_back(b);
    }
  }

  internal::ScoreTrace trace;
  Eigen::MatrixXd g = internal::ScoreSegments(model, segs,
                                              grads ? &trace : nullptr);
  Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(1, g.cols());

  LossTerms out;
  const double inv_l = 1.0 / static_cast<double>(labeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const Eigen::Index c = static_cast<Eigen::Index>(2 * i);
    const double y = labeled[i].y;
    const double delta = g(0, c) - g(0, c + 1);
    const double p01 = Sigmoid(delta);   // P(seg0 > seg1)
    const double p10 = Sigmoid(-delta);  // P(seg1 > seg0)
    out.cross_entropy -= inv_l * ((1.0 - y) * std::log(std::max(p01, kLogClamp)) +
                                  y * std::log(std::max(p10, kLogClamp)));
    double d_delta = 0.0;
    if (p01 >= kLogClamp) d_delta -= (1.0 - y) * p10;
    if (p10 >= kLogClamp) d_delta += y * p01;
    dg(0, c) += inv_l * d_delta;
    dg(0, c + 1) -= inv_l * d_delta;
  }
  if (use_smooth) {
    const double inv_u = 1.0 / static_cast<double>(smooth.size());
    const Eigen::Index base = static_cast<Eigen::Index>(2 * labeled.size());
    for (std::size_t i = 0; i < smooth.size(); ++i) {
      const Eigen::Index c = base + static_cast<Eigen::Index>(2 * i);
      const double p = Sigmoid(g(0, c) - g(0, c + 1));
      out.smoothness += inv_u * (p - 0.5) * (p - 0.5);
      const double d_delta = nu * inv_u * 2.0 * (p - 0.5) * p * (1.0 - p);
      dg(0, c) += d_delta;
      dg(0, c + 1) -= d_delta;
    }
  }
  out.total = out.cross_entropy + nu * out.smoothness;

  if (grads != nullptr) {
    Eigen::MatrixXd d_pooled;
    grads->head = nn::Backward(model.head, trace.head, dg, &d_pooled);
    Eigen::MatrixXd d_emb(d_pooled.rows(), trace.packed.inputs.cols());
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const int len = trace.packed.lengths[i];
      d_emb.middleCols(trace.packed.offsets[i], len) =
          (d_pooled.col(static_cast<Eigen::Index>(i)) / len).replicate(1, len);
    }
    grads->encoder = nn::Backward(model.encoder, trace.encoder, d_emb);
  }
  return out;
}

// Flat parameter vector [encoder, head], used by gradient checks.
inline Eigen::VectorXd FlattenParams(const PredictorModel& m) {
  Eigen::VectorXd e = nn::FlattenParams(m.encoder);
  Eigen::VectorXd h = nn::FlattenParams(m.head);
  Eigen::VectorXd out(e.size() + h.size());
  out << e, h;
  return out;
}

inline void UnflattenParams(PredictorModel& m, const Eigen::VectorXd& flat) {
  const Eigen::Index next = nn::UnflattenParams(m.encoder, flat, 0);
  nn::UnflattenParams(m.head, flat, next);
}

inline Eigen::VectorXd FlattenGrads(const PredictorGrads& g) {
  Eigen::VectorXd e = nn::FlattenGrads(g.encoder);
  Eigen::VectorXd h = nn::FlattenGrads(g.head);
  Eigen::VectorXd out(e.size() + h.size());
  out << e, h;
  return out;
}

// Roughly 10% of pair ids, chosen by FNV-1a hash.
inline bool IsHeldOut(const std::string& pair_id) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : pair_id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h % 10 == 0;
}

// Fraction of non-tie triples whose label the predictor gets right. The
// predictor "says" seg0 wins iff P > 0.5.
inline double LabelAccuracy(const PredictorModel& model,
                            std::span<const LabeledPair> pairs) {
  int total = 0;
  int correct = 0;
  for (const auto& p : pairs) {
    if (p.y == 0.5) continue;
    const double prob = PrefProb(model, p.seg0, p.seg1);
    const double predicted = prob > 0.5 ? 0.0 : 1.0;
    ++total;
    correct += predicted == p.y;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

struct PredictorLogRow {
  int step = 0;
  double cross_entropy = 0.0;
  double smoothness = 0.0;
  double heldout_accuracy = 0.0;
};

struct PredictorTrainResult {
  PredictorModel model;
  std::vector<PredictorLogRow> log;
};

inline std::vector<LabeledPair> ResolveTriples(
    const Dataset& d, std::span<const PreferenceTriple> prefs) {
  std::vector<LabeledPair> out;
  out.reserve(prefs.size());
  for (const auto& p : prefs) {
    data::ValidateTriple(p);
    out.push_back({SegmentView(d, p.seg0), SegmentView(d, p.seg1), p.y});
  }
  return out;
}

// M Adam steps on fresh minibatches. Labeled triples are drawn with
// replacement from the training split; overlapping pairs are resampled
// from `d` every step (never when nu == 0).
inline PredictorTrainResult TrainPredictor(
    const Dataset& d, std::span<const PreferenceTriple> prefs,
    const PredictorTrainConfig& config) {
  if (prefs.empty()) throw InvalidArgument("preference dataset is empty");
  if (config.steps < 0) throw InvalidArgument("steps must be >= 0");
  std::vector<PreferenceTriple> train_prefs;
  std::vector<PreferenceTriple> heldout_prefs;
  for (const auto& p : prefs) {
    (IsHeldOut(p.pair_id) ? heldout_prefs : train_prefs).push_back(p);
  }
  if (train_prefs.empty()) {
    throw InvalidArgument("every preference fell into the held-out split");
  }
  const std::vector<LabeledPair> train = ResolveTriples(d, train_prefs);
  const std::vector<LabeledPair> heldout = ResolveTriples(d, heldout_prefs);
  const int k = train.front().seg0.k();

  Rng rng(config.seed);
  const auto& first = d.Get(train_prefs.front().seg0.traj_id);
  PredictorTrainResult result;
  result.model = MakePredictor(static_cast<int>(first.states[0].size()),
                               static_cast<int>(first.actions[0].size()),
                               config, &rng);
  PredictorModel& model = result.model;
  nn::AdamState enc_opt = nn::AdamState::For(model.encoder, config.learning_rate);
  nn::AdamState head_opt = nn::AdamState::For(model.head, config.learning_rate);

  std::vector<LabeledPair> batch;
  std::vector<SegmentViewPair> smooth;
  for (int step = 1; step <= config.steps; ++step) {
    batch.clear();
    for (int i = 0; i < config.labeled_batch; ++i) {
      batch.push_back(train[static_cast<std::size_t>(
          rng.UniformInt(0, static_cast<int>(train.size()) - 1))]);
    }
    smooth.clear();
    if (config.nu > 0.0) {
      for (int i = 0; i < config.smooth_batch; ++i) {
        auto [a, b] = data::SampleOverlappingPair(d, k, config.m, rng);
        smooth.emplace_back(SegmentView(d, a), SegmentView(d, b));
      }
    }
    PredictorGrads grads;
    LossTerms terms = PredictorLoss(model, batch, smooth, config.nu, &grads);
    nn::AdamStep(model.encoder, grads.encoder, enc_opt);
    nn::AdamStep(model.head, grads.head, head_opt);
    if (step % config.log_every == 0 || step == config.steps) {
      result.log.push_back({step, terms.cross_entropy, terms.smoothness,
                            LabelAccuracy(model, heldout)});
    }
  }
  return result;
}

// P[window_i > window_{i+1}] for consecutive one-step-shifted windows.
inline std::vector<double> SmoothnessProfile(const PredictorModel& model,
                                             const data::Trajectory& traj,
                                             int k) {
  const int windows = traj.horizon() - k;
  if (k < 0 || windows < 2) {
    throw InvalidArgument("trajectory " + traj.id +
                          " too short for two windows of length k+1");
  }
  std::vector<SegmentView> segs;
  for (int i = 0; i < windows; ++i) segs.emplace_back(traj, i, k);
  Eigen::MatrixXd g = internal::ScoreSegments(model, segs, nullptr);
  std::vector<double> out;
  for (int i = 0; i + 1 < windows; ++i) out.push_back(Sigmoid(g(0, i) - g(0, i + 1)));
  return out;
}

// Scores of every window of length k + 1 in a dataset, computed once from
// cached per-transition embeddings. Lookups are O(1).
class WindowScoreTable {
 public:
  WindowScoreTable(const PredictorModel& model, const Dataset& d, int k) : k_(k) {
    if (k < 0 || k + 1 > d.horizon()) throw InvalidArgument("bad window length");
    const int windows = d.horizon() - k;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto& t = d.at(i);
      SegmentView full(t, 0, t.horizon() - 1);
      Eigen::MatrixXd emb = nn::Forward(model.encoder, full.StateActionMatrix());
      Eigen::MatrixXd pooled(emb.rows(), windows);
      for (int s = 0; s < windows; ++s) {
        pooled.col(s) = emb.middleCols(s, k + 1).rowwise().mean();
      }
      Eigen::MatrixXd g = nn::Forward(model.head, pooled);
      index_.emplace(t.id, scores_.size());
      scores_.emplace_back(g.row(0).transpose());
    }
  }

  double Score(const Segment& s) const {
    if (s.k != k_) throw InvalidArgument("window length differs from table");
    auto it = index_.find(s.traj_id);
    if (it == index_.end()) throw InvalidArgument("unknown trajectory " + s.traj_id);
    return scores_[it->second][s.start];
  }

  double PrefProb(const Segment& a, const Segment& b) const {
    return Sigmoid(Score(a) - Score(b));
  }

 private:
  int k_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Eigen::VectorXd> scores_;
};

inline Json PredictorToJson(const PredictorModel& m,
                            const PredictorTrainConfig& config) {
  Json j;
  j["encoder"] = nn::ToJson(m.encoder);
  j["head"] = nn::ToJson(m.head);
  j["config"] = {{"nu", config.nu},
                 {"m", config.m},
                 {"steps", config.steps},
                 {"labeled_batch", config.labeled_batch},
                 {"smooth_batch", config.smooth_batch},
                 {"learning_rate", config.learning_rate},
                 {"hidden_dim", config.hidden_dim},
                 {"embed_dim", config.embed_dim},
                 {"seed", config.seed}};
  return j;
}

inline PredictorModel PredictorFromJson(const Json& j) {
  if (!j.contains("encoder") || !j.contains("head")) {
    throw IoError("predictor checkpoint needs 'encoder' and 'head'");
  }
  PredictorModel m{nn::MlpFromJson(j["encoder"]), nn::MlpFromJson(j["head"])};
  if (m.head.output_dim() != 1 ||
      m.head.input_dim() != m.encoder.output_dim()) {
    throw DimensionError("predictor", "head does not fit encoder");
  }
  return m;
}

}  // namespace prefopt::predictor
