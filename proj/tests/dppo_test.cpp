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


#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "prefopt/data/sampling.hpp"
#include "prefopt/dppo/trainer.hpp"
#include "prefopt/nn/gradcheck.hpp"

namespace prefopt::dppo {
namespace {

using data::Trajectory;

const double kLn2 = std::log(2.0);

// Policy whose output is exactly zero everywhere (zero weights, symmetric box).
PolicyModel ZeroPolicy(int sd, int ad) {
  env::EnvSpec spec = env::MakePointmass2d();
  spec.state_dim = sd;
  spec.action_dim = ad;
  spec.action_low = Eigen::VectorXd::Constant(ad, -10.0);
  spec.action_high = Eigen::VectorXd::Constant(ad, 10.0);
  return MakePolicy(spec, {4}, 0.0, nullptr);
}

Trajectory MakeTrajectory(const std::string& id, const std::vector<Eigen::VectorXd>& actions,
                          int sd) {
  Trajectory t;
  t.id = id;
  t.env = "pointmass2d";
  for (std::size_t i = 0; i < actions.size(); ++i) {
    t.states.push_back(Eigen::VectorXd::Constant(sd, 0.1 * static_cast<double>(i)));
    t.actions.push_back(actions[i]);
    t.rewards.push_back(0.0);
  }
  t.states.push_back(Eigen::VectorXd::Zero(sd));
  return t;
}

const data::Dataset& SmallPointmass() {
  static const data::Dataset d =
      data::GenerateOfflineDataset(env::MakePointmass2d(),
                                   {{"expert", 0.3}, {"medium", 0.3}, {"random", 0.4}},
                                   20, 3)
          .first;
  return d;
}

PolicyModel RandomPolicy(std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  PolicyModel p = MakePolicy(env::MakePointmass2d(), {8, 8}, 0.0, &rng);
  for (auto& w : p.net.weights) w *= scale;
  for (auto& b : p.net.biases) b = Eigen::VectorXd::Constant(b.size(), 0.1 * scale);
  return p;
}

std::vector<LabeledPair> RandomTriples(const data::Dataset& d, int n, int k, Rng& rng) {
  std::vector<LabeledPair> out;
  const double ys[] = {0.0, 1.0, 0.5};
  for (int i = 0; i < n; ++i) {
    auto [a, b] = data::SampleSegmentPair(d, k, rng);
    out.push_back({SegmentView(d, a), SegmentView(d, b), ys[rng.UniformInt(0, 2)]});
  }
  return out;
}

TEST(TransitionDistance, Examples) {
  PolicyModel p = ZeroPolicy(2, 2);
  const Eigen::Vector2d s(0.5, -0.5);
  EXPECT_LE(TransitionDistance(p, s, Eigen::Vector2d::Zero()), 1e-6);
  EXPECT_NEAR(TransitionDistance(p, s, Eigen::Vector2d(3.0, 4.0)), 5.0, 1e-9);
  EXPECT_NEAR(TransitionDistance(p, s, Eigen::Vector2d(-3.0, -4.0)), 5.0, 1e-9);
  EXPECT_THROW(TransitionDistance(p, s, Eigen::Vector3d::Zero()), DimensionError);
}

TEST(TransitionDistance, Symmetric) {
  PolicyModel p = RandomPolicy(1);
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd s = Eigen::VectorXd::Random(4);
    Eigen::VectorXd a = Eigen::VectorXd::Random(2);
    const Eigen::VectorXd pi = p.Act(s);
    // |pi - a| from the library vs |a - pi| by hand.
    EXPECT_NEAR(TransitionDistance(p, s, a), std::sqrt((a - pi).squaredNorm() + 1e-12),
                1e-15);
  }
}

TEST(SegmentDistance, MeanOfTransitions) {
  PolicyModel p = ZeroPolicy(1, 2);
  Trajectory t = MakeTrajectory("t", {Eigen::Vector2d(2.0, 0.0), Eigen::Vector2d(0.0, 4.0),
                                      Eigen::Vector2d(0.0, 0.0)},
                                1);
  EXPECT_NEAR(SegmentDistance(p, SegmentView(t, 0, 1)), 3.0, 1e-9);
  EXPECT_LE(SegmentDistance(p, SegmentView(t, 2, 0)), 1e-6);
}

TEST(SegmentDistance, MatchesLoopOracle) {
  const data::Dataset& d = SmallPointmass();
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    PolicyModel p = RandomPolicy(10 + trial);
    auto [a, b] = data::SampleSegmentPair(d, 7, rng);
    SegmentView v(d, a);
    double sum = 0.0;
    for (int t = 0; t < v.length(); ++t) sum += TransitionDistance(p, v.state(t), v.action(t));
    EXPECT_NEAR(SegmentDistance(p, v), sum / v.length(), 1e-12);
  }
}

TEST(PairScore, Examples) {
  EXPECT_NEAR(PairScoreFromDistances(1.7, 1.7, 1.0), -kLn2, 1e-15);
  EXPECT_NEAR(PairScoreFromDistances(1.0, 2.0, 0.5), -kLn2, 1e-15);
  // The limit 0- underflows to -0.0.
  EXPECT_TRUE(std::signbit(PairScoreFromDistances(0.0, 1e6, 1.0)));
  EXPECT_GT(PairScoreFromDistances(0.0, 1e6, 1.0), -1e-300);
  EXPECT_NEAR(PairScoreFromDistances(0.0, 50.0, 1.0), -std::exp(-50.0), 1e-30);
  EXPECT_TRUE(std::isfinite(PairScoreFromDistances(1e300, 0.0, 1.0)));
}

TEST(PairScore, AlgebraicProperties) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    // Multiples of 1/1024 below 2^20 keep every sum exact.
    const double d0 = rng.UniformInt(0, 1 << 14) / 1024.0;
    const double d1 = rng.UniformInt(0, 1 << 14) / 1024.0;
    const double alpha = rng.UniformInt(1, 1 << 14) / 1024.0;
    const double lambda = rng.Uniform(0.05, 0.95);

    EXPECT_LT(PairScoreFromDistances(d0, d1, lambda), 0.0);
    EXPECT_EQ(PairScoreFromDistances(d0 + alpha, d1 + alpha, 1.0),
              PairScoreFromDistances(d0, d1, 1.0));
    EXPECT_LT(PairScoreFromDistances(d0 + alpha, d1 + alpha, lambda),
              PairScoreFromDistances(d0, d1, lambda));
    EXPECT_NEAR(std::exp(PairScoreFromDistances(d0, d1, 1.0)) +
                    std::exp(PairScoreFromDistances(d1, d0, 1.0)),
                1.0, 1e-12);
    EXPECT_LT(PairScoreFromDistances(d0 + alpha, d1, lambda),
              PairScoreFromDistances(d0, d1, lambda));
    EXPECT_GT(PairScoreFromDistances(d0, d1 + alpha, lambda),
              PairScoreFromDistances(d0, d1, lambda));
  }
}

TEST(PairScore, ConservativeInScale) {
  // At lambda < 1 the score keeps falling as both distances grow together.
  double prev = PairScoreFromDistances(0.2, 0.4, 0.5);
  for (int i = 1; i <= 50; ++i) {
    const double alpha = 0.1 * i;
    const double s = PairScoreFromDistances(0.2 + alpha, 0.4 + alpha, 0.5);
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(BatchScore, SingleTripleEqualsPairScore) {
  const data::Dataset& d = SmallPointmass();
  Rng rng(6);
  PolicyModel p = RandomPolicy(7);
  auto triples = RandomTriples(d, 1, 5, rng);
  triples[0].y = 0.0;
  EXPECT_NEAR(BatchScore(p, triples, 0.5, nullptr).score,
              PairScore(p, triples[0].seg0, triples[0].seg1, 0.5), 1e-12);
  triples[0].y = 1.0;
  EXPECT_NEAR(BatchScore(p, triples, 0.5, nullptr).score,
              PairScore(p, triples[0].seg1, triples[0].seg0, 0.5), 1e-12);
  triples[0].y = 0.5;
  EXPECT_NEAR(BatchScore(p, triples, 0.5, nullptr).score,
              0.5 * (PairScore(p, triples[0].seg0, triples[0].seg1, 0.5) +
                     PairScore(p, triples[0].seg1, triples[0].seg0, 0.5)),
              1e-12);
}

TEST(BatchScore, RelabelingSymmetry) {
  const data::Dataset& d = SmallPointmass();
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    PolicyModel p = RandomPolicy(20 + trial);
    auto triples = RandomTriples(d, 8, 6, rng);
    std::vector<LabeledPair> flipped;
    for (const auto& t : triples) flipped.push_back({t.seg1, t.seg0, 1.0 - t.y});
    EXPECT_NEAR(BatchScore(p, triples, 0.3, nullptr).score,
                BatchScore(p, flipped, 0.3, nullptr).score, 1e-14);
  }
}

TEST(BatchScore, GradientMatchesFiniteDifferences) {
  const data::Dataset& d = SmallPointmass();
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const PolicyModel base = RandomPolicy(30 + trial);
    const auto triples = RandomTriples(d, 4, 3, rng);
    const double lambda = rng.Uniform(0.1, 1.0);
    nn::FlatLoss loss = [&](const Eigen::VectorXd& flat, Eigen::VectorXd* grad) {
      PolicyModel p = base;
      nn::UnflattenParams(p.net, flat);
      nn::GradBuffer g;
      const double s = BatchScore(p, triples, lambda, grad ? &g : nullptr).score;
      if (grad != nullptr) *grad = nn::FlattenGrads(g);
      return s;
    };
    nn::GradCheckReport r = nn::CheckGradient(loss, nn::FlattenParams(base.net), 1e-4);
    EXPECT_TRUE(r.pass) << "trial " << trial << " rel error " << r.max_rel_error;
  }
}

TEST(BatchScore, DistanceSummaries) {
  const data::Dataset& d = SmallPointmass();
  Rng rng(10);
  PolicyModel p = RandomPolicy(11);
  auto triples = RandomTriples(d, 6, 4, rng);
  triples[0].y = 0.0;
  triples[1].y = 1.0;
  double dp = 0.0, du = 0.0;
  int n = 0;
  for (const auto& t : triples) {
    if (t.y == 0.5) continue;
    const double d0 = SegmentDistance(p, t.seg0);
    const double d1 = SegmentDistance(p, t.seg1);
    dp += t.y == 0.0 ? d0 : d1;
    du += t.y == 0.0 ? d1 : d0;
    ++n;
  }
  BatchScoreResult r = BatchScore(p, triples, 0.5, nullptr);
  EXPECT_NEAR(r.mean_d_preferred, dp / n, 1e-12);
  EXPECT_NEAR(r.mean_d_unpreferred, du / n, 1e-12);
}

TEST(BatchScore, Errors) {
  const data::Dataset& d = SmallPointmass();
  Rng rng(12);
  PolicyModel p = RandomPolicy(13);
  auto triples = RandomTriples(d, 2, 4, rng);
  EXPECT_THROW(BatchScore(p, {}, 0.5, nullptr), InvalidArgument);
  EXPECT_THROW(BatchScore(p, triples, 0.0, nullptr), InvalidArgument);
  EXPECT_THROW(BatchScore(p, triples, 1.5, nullptr), InvalidArgument);
  triples[0].y = 0.3;
  EXPECT_THROW(BatchScore(p, triples, 0.5, nullptr), InvalidArgument);
}

TEST(ScoreOracleCheck, RandomTinyInstances) {
  const data::Dataset& d = SmallPointmass();
  Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    PolicyModel p = RandomPolicy(100 + trial, rng.Uniform(0.2, 2.0));
    auto triples = RandomTriples(d, rng.UniformInt(1, 8), rng.UniformInt(0, 4), rng);
    EXPECT_TRUE(ScoreOracleCheck(p, triples, rng.Uniform(0.05, 1.0))) << trial;
  }
}

TEST(ScoreOracleCheck, EqualDistancesGiveMinusLogTwo) {
  const data::Dataset& d = SmallPointmass();
  PolicyModel p = RandomPolicy(15);
  SegmentView v(d.at(0), 3, 4);
  std::vector<LabeledPair> triples = {{v, v, 0.0}, {v, v, 1.0}, {v, v, 0.5}};
  EXPECT_NEAR(BatchScore(p, triples, 1.0, nullptr).score, -kLn2, 1e-15);
  EXPECT_TRUE(ScoreOracleCheck(p, triples, 1.0));
}

TEST(PseudoLabel, Boundary) {
  EXPECT_EQ(PseudoLabelFromProb(0.9), 0.0);
  EXPECT_EQ(PseudoLabelFromProb(0.1), 1.0);
  EXPECT_EQ(PseudoLabelFromProb(0.5), 1.0);
  const data::Dataset& d = SmallPointmass();
  Rng rng(16);
  predictor::PredictorTrainConfig c;
  c.hidden_dim = 8;
  c.embed_dim = 8;
  predictor::PredictorModel m = predictor::MakePredictor(4, 2, c, &rng);
  SegmentView v(d.at(1), 0, 5);
  EXPECT_EQ(PseudoLabel(m, v, v), 1.0);
  for (int i = 0; i < 30; ++i) {
    auto [a, b] = data::SampleSegmentPair(d, 5, rng);
    SegmentView va(d, a), vb(d, b);
    if (predictor::PrefProb(m, va, vb) == 0.5) continue;
    EXPECT_NE(PseudoLabel(m, va, vb), PseudoLabel(m, vb, va));
  }
}

TEST(BatchScore, ScriptedAndAgreeingPseudoLabelsMatch) {
  const data::Dataset& d = SmallPointmass();
  Rng rng(17);
  predictor::PredictorTrainConfig c;
  c.hidden_dim = 8;
  c.embed_dim = 8;
  predictor::PredictorModel m = predictor::MakePredictor(4, 2, c, &rng);
  std::vector<LabeledPair> scripted, pseudo;
  while (scripted.size() < 10) {
    auto [a, b] = data::SampleSegmentPair(d, 5, rng);
    SegmentView va(d, a), vb(d, b);
    const double y_true = data::ScriptedLabel(va, vb);
    const double y_hat = PseudoLabel(m, va, vb);
    if (y_true != y_hat) continue;
    scripted.push_back({va, vb, y_true});
    pseudo.push_back({va, vb, y_hat});
  }
  PolicyModel p = RandomPolicy(18);
  EXPECT_EQ(BatchScore(p, scripted, 0.5, nullptr).score,
            BatchScore(p, pseudo, 0.5, nullptr).score);
}

TEST(Policy, OutputsStayInBox) {
  PolicyModel p = RandomPolicy(19, 20.0);
  env::EnvSpec spec = env::MakePointmass2d();
  Rng rng(20);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd s = Eigen::VectorXd::Random(4) * 100.0;
    Eigen::VectorXd a = p.Act(s);
    EXPECT_TRUE((a.array() >= spec.action_low.array()).all());
    EXPECT_TRUE((a.array() <= spec.action_high.array()).all());
  }
}

TEST(Policy, CheckpointRoundTrip) {
  PolicyModel p = RandomPolicy(21);
  p.dropout = 0.25;
  Json j = Json::parse(PolicyToJson(p, "pointmass2d").dump());
  EXPECT_EQ(j["env"], "pointmass2d");
  EXPECT_EQ(j["action_low"][0], -1.0);
  EXPECT_EQ(j["action_high"][1], 1.0);
  PolicyModel back = PolicyFromJson(j);
  EXPECT_EQ(nn::FlattenParams(back.net), nn::FlattenParams(p.net));
  EXPECT_EQ(back.dropout, 0.25);
  Eigen::VectorXd s = Eigen::VectorXd::Random(4);
  EXPECT_EQ(back.Act(s), p.Act(s));
  j["net"]["activations"]["output"] = "identity";
  EXPECT_THROW(PolicyFromJson(j), IoError);
}

struct TrainFixture {
  env::EnvSpec spec = env::MakePointmass2d();
  env::ReferenceReturns ref{-176.0, -45.0};
  predictor::PredictorModel predictor;
  DppoTrainConfig config;

  TrainFixture() {
    predictor::PredictorTrainConfig c;
    c.hidden_dim = 8;
    c.embed_dim = 8;
    Rng rng(22);
    predictor = predictor::MakePredictor(4, 2, c, &rng);
    config.steps = 300;
    config.eval_every = 100;
    config.eval_episodes = 2;
    config.k = 10;
    config.seed = 5;
  }
};

TEST(TrainPolicy, ZeroStepsReturnsInitialization) {
  TrainFixture f;
  f.config.steps = 0;
  DppoTrainResult r = TrainPolicy(SmallPointmass(), f.predictor, f.spec, f.ref, f.config);
  Rng rng(f.config.seed);
  rng.NextSeed();
  PolicyModel init = MakePolicy(f.spec, f.config.hidden, f.config.dropout, &rng);
  EXPECT_EQ(nn::FlattenParams(r.policy.net), nn::FlattenParams(init.net));
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].step, 0);
}

TEST(TrainPolicy, DeterministicLogs) {
  TrainFixture f;
  DppoTrainResult a = TrainPolicy(SmallPointmass(), f.predictor, f.spec, f.ref, f.config);
  DppoTrainResult b = TrainPolicy(SmallPointmass(), f.predictor, f.spec, f.ref, f.config);
  ASSERT_EQ(a.log.size(), 4u);
  EXPECT_EQ(a.log[3].step, 300);
  EXPECT_EQ(DppoLogCsv(a.log), DppoLogCsv(b.log));
  EXPECT_EQ(nn::FlattenParams(a.policy.net), nn::FlattenParams(b.policy.net));
  EXPECT_EQ(DppoLogCsv(a.log).substr(0, 59),
            "step,score,d_pref,d_unpref,eval_return_raw,eval_return_norm");
  f.config.seed = 6;
  DppoTrainResult c = TrainPolicy(SmallPointmass(), f.predictor, f.spec, f.ref, f.config);
  EXPECT_NE(DppoLogCsv(a.log), DppoLogCsv(c.log));
}

TEST(TrainPolicy, AscentRaisesScore) {
  // Fixed labels, no dropout: a few hundred steps must raise S on that batch.
  const data::Dataset& d = SmallPointmass();
  Rng rng(23);
  auto triples = RandomTriples(d, 16, 10, rng);
  PolicyModel p = RandomPolicy(24);
  nn::AdamState opt = nn::AdamState::For(p.net, 1e-2);
  const double before = BatchScore(p, triples, 0.5, nullptr).score;
  for (int i = 0; i < 300; ++i) {
    nn::GradBuffer g;
    BatchScore(p, triples, 0.5, &g);
    g *= -1.0;
    nn::AdamStep(p.net, g, opt);
  }
  EXPECT_GT(BatchScore(p, triples, 0.5, nullptr).score, before + 0.05);
}

TEST(TrainPolicy, Errors) {
  TrainFixture f;
  f.config.lambda = 0.0;
  EXPECT_THROW(TrainPolicy(SmallPointmass(), f.predictor, f.spec, f.ref, f.config),
               InvalidArgument);
  f.config.lambda = 0.5;
  EXPECT_THROW(TrainPolicy(SmallPointmass(), f.predictor, env::MakePendulum(), f.ref,
                           f.config),
               InvalidArgument);
  f.config.steps = -1;
  EXPECT_THROW(TrainPolicy(SmallPointmass(), f.predictor, f.spec, f.ref, f.config),
               InvalidArgument);
}

TEST(PreferredCloserFraction, MatchesManualCount) {
  TrainFixture f;
  const data::Dataset& d = SmallPointmass();
  PolicyModel p = RandomPolicy(25);
  Rng rng(1);
  int closer = 0;
  for (int i = 0; i < 100; ++i) {
    auto [a, b] = data::SampleSegmentPair(d, 10, rng);
    SegmentView va(d, a), vb(d, b);
    const bool zero_wins = predictor::PrefProb(f.predictor, va, vb) > 0.5;
    const double d0 = SegmentDistance(p, va);
    const double d1 = SegmentDistance(p, vb);
    closer += zero_wins ? d0 < d1 : d1 < d0;
  }
  EXPECT_DOUBLE_EQ(PreferredCloserFraction(p, d, f.predictor, 10, 100, 1), closer / 100.0);
}

}  // namespace
}  // namespace prefopt::dppo
