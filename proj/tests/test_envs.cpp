#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "imle/errors.hpp"
#include "imle/envs.hpp"

namespace imle {
namespace {

TEST(RngTest, StreamsAreReproducibleAndDistinct) {
  Rng a = Rng::ForStream(5, Stream::kLatents, 3, 1);
  Rng b = Rng::ForStream(5, Stream::kLatents, 3, 1);
  Rng c = Rng::ForStream(5, Stream::kLatents, 3, 2);
  Rng d = Rng::ForStream(5, Stream::kShuffle, 3, 1);
  const double x = a.Normal();
  EXPECT_EQ(x, b.Normal());
  EXPECT_NE(x, c.Normal());
  EXPECT_NE(x, d.Normal());
}

TEST(RngTest, UniformAndIndexRanges) {
  Rng rng(3);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.Uniform(-1.0, 1.0);
    ASSERT_GE(u, -1.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    ASSERT_LT(rng.Index(7), 7u);
  }
  EXPECT_LT(std::abs(sum / 1e5), 0.01);
}

TEST(ToyTest, BranchesShareTrunkAndSplit) {
  EXPECT_EQ(ToyUpper(-0.5), ToyLower(-0.5));
  EXPECT_EQ(ToyUpper(0.0), ToyTrunk(0.0));
  EXPECT_GT(ToyUpper(0.5) - ToyLower(0.5), 0.5);
}

TEST(ToyTest, DatasetIsReproducible) {
  ToyBranchSpec spec;
  spec.seed = 4;
  const ToyDataset a = GenToyBranchDataset(spec), b = GenToyBranchDataset(spec);
  ASSERT_EQ(a.demos.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(a.demos[i].observation, b.demos[i].observation);
    EXPECT_EQ(a.demos[i].actions, b.demos[i].actions);
    EXPECT_EQ(a.labels[i], b.labels[i]);
    EXPECT_EQ(a.demos[i].actions.shape(), (std::vector<std::size_t>{16, 1}));
  }
}

TEST(ToyTest, LabelsFollowCondition) {
  ToyBranchSpec spec;
  spec.n_demos = 500;
  spec.regions = {BranchRegion{1.0, 1.0, 0.0}};
  const ToyDataset ds = GenToyBranchDataset(spec);
  for (std::size_t i = 0; i < ds.demos.size(); ++i) {
    const double x = ds.demos[i].observation[0];
    EXPECT_GE(x, -1.0);
    EXPECT_LT(x, 1.0);
    EXPECT_EQ(ds.labels[i], x > 0.0 ? ToyBranch::kUpper : ToyBranch::kShared);
  }
}

TEST(ToyTest, BalancedCountsWithinTwoPercent) {
  ToyBranchSpec spec;
  spec.n_demos = 10000;
  spec.seed = 9;
  const ToyDataset ds = GenToyBranchDataset(spec);
  std::size_t upper = 0, lower = 0;
  for (ToyBranch l : ds.labels) {
    upper += l == ToyBranch::kUpper;
    lower += l == ToyBranch::kLower;
  }
  const double half = 0.5 * static_cast<double>(upper + lower);
  EXPECT_LE(std::abs(static_cast<double>(upper) - half), 0.02 * half);
  EXPECT_GT(upper + lower, 4500u);
}

TEST(ToyTest, SpecValidation) {
  ToyBranchSpec spec;
  spec.n_demos = 1;
  EXPECT_THROW(GenToyBranchDataset(spec), PreconditionError);
  spec = {};
  spec.regions = {BranchRegion{1.0, 0.7, 0.4}};
  EXPECT_THROW(GenToyBranchDataset(spec), PreconditionError);
}

TEST(ToyTest, SuccessPredicate) {
  EXPECT_TRUE(ToySuccess(0.5, ToyUpper(0.5) + 0.05, 0.02));
  EXPECT_FALSE(ToySuccess(0.5, ToyUpper(0.5) + 0.07, 0.02));
  EXPECT_TRUE(ToySuccess(0.5, ToyLower(0.5), 0.02));
  EXPECT_FALSE(ToySuccess(0.5, 0.5 * (ToyUpper(0.5) + ToyLower(0.5)), 0.02));
}

PushLiteState BaseState() {
  PushLiteState s;
  s.block = {0.5, 0.3};
  s.effector = {0.2, 0.2};
  s.target = {0.5, 0.6};
  return s;
}

TEST(PushLiteTest, ZeroActionKeepsState) {
  const PushLiteState s = BaseState();
  PushLiteState n = PushLiteStep(s, {0.0, 0.0});
  EXPECT_EQ(n.t, 1);
  n.t = 0;
  EXPECT_EQ(n, s);
}

TEST(PushLiteTest, FreeMotionLeavesBlock) {
  const PushLiteState s = BaseState();
  const PushLiteState n = PushLiteStep(s, {0.01, 0.0});
  EXPECT_NEAR(n.effector.x, 0.21, 1e-15);
  EXPECT_EQ(n.block, s.block);
  EXPECT_EQ(n.angle, s.angle);
}

TEST(PushLiteTest, ActionsAreClippedToMaxStep) {
  const PushLiteState s = BaseState();
  const PushLiteState n = PushLiteStep(s, {0.3, 0.4});
  EXPECT_NEAR((n.effector - s.effector).Norm(), 0.02, 1e-15);
}

// Frozen output of the simulator for a fixed contact sequence: an off-center
// push from below, a sweep around the block and a push from the right.
TEST(PushLiteTest, GoldenContactTrace) {
  PushLiteState s;
  s.block = {0.5, 0.3};
  s.effector = {0.47, 0.2};
  s.target = {0.5, 0.6};
  struct Golden {
    int step;
    double ex, ey, bx, by, angle;
  };
  const Golden golden[] = {
      {19, 0.57000000000000006, 0.50000000000000022, 0.57486409685104622,
       0.42000749606531174, -1.0739561341300954},
      {29, 0.63000000000000012, 0.43000000000000016, 0.56336543210373891,
       0.4068946563524295, -1.1223048754065079},
      {39, 0.42999999999999994, 0.43000000000000016, 0.46753579968603326,
       0.34106822958638355, -0.61280486094384079},
  };
  std::size_t g = 0;
  for (int i = 0; i < 40; ++i) {
    const Vec2 a = i < 15   ? Vec2{0.0, 0.02}
                   : i < 23 ? Vec2{0.02, 0.0}
                   : i < 30 ? Vec2{0.0, -0.01}
                            : Vec2{-0.02, 0.0};
    s = PushLiteStep(s, a);
    if (g < 3 && i == golden[g].step) {
      EXPECT_NEAR(s.effector.x, golden[g].ex, 1e-12) << "step " << i;
      EXPECT_NEAR(s.effector.y, golden[g].ey, 1e-12) << "step " << i;
      EXPECT_NEAR(s.block.x, golden[g].bx, 1e-12) << "step " << i;
      EXPECT_NEAR(s.block.y, golden[g].by, 1e-12) << "step " << i;
      EXPECT_NEAR(s.angle, golden[g].angle, 1e-12) << "step " << i;
      ++g;
    }
  }
  EXPECT_EQ(g, 3u);
  EXPECT_EQ(s.t, 40);
}

TEST(PushLiteTest, RandomActionsStayInBounds) {
  Rng rng(77);
  PushLiteState s = PushLiteRandomInitialState(rng);
  for (int i = 0; i < 100000; ++i) {
    if (i % 1000 == 0) {
      s = PushLiteRandomInitialState(rng);
      s.effector = {s.block.x + rng.Uniform(-0.1, 0.1), s.block.y + rng.Uniform(-0.1, 0.1)};
    }
    const Vec2 a{rng.Uniform(-0.03, 0.03), rng.Uniform(-0.03, 0.03)};
    s = PushLiteStep(s, a);
    ASSERT_TRUE(InBounds(s)) << "step " << i;
  }
}

TEST(PushLiteTest, SuccessPredicate) {
  PushLiteState s = BaseState();
  s.block = s.target;
  EXPECT_TRUE(PushLiteSuccess(s));
  s.block = {1.0, 0.0};
  EXPECT_FALSE(PushLiteSuccess(s));
  s.block = {s.target.x + 0.05, s.target.y};
  EXPECT_FALSE(PushLiteSuccess(s));
  s.block = {s.target.x + 0.0499, s.target.y};
  EXPECT_TRUE(PushLiteSuccess(s));
  s.angle = 0.25;
  EXPECT_FALSE(PushLiteSuccess(s));
  s.angle = 2.0 * std::numbers::pi + 0.1;
  EXPECT_TRUE(PushLiteSuccess(s));
}

TEST(PushLiteTest, ObservationLayout) {
  PushLiteState s = BaseState();
  s.angle = 0.3;
  const auto o = PushLiteObservation(s);
  EXPECT_EQ(o[0], 0.2);
  EXPECT_EQ(o[3], 0.3);
  EXPECT_EQ(o[4], std::sin(0.3));
  EXPECT_EQ(o[5], std::cos(0.3));
  EXPECT_EQ(o[7], 0.6);
}

TEST(DemonstratorTest, NoJitterLeftPassesLeftOfBlock) {
  DemonstratorOptions opts;
  opts.jitter = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (int mode : {0, 1}) {
      Rng rng(seed);
      const Episode ep = ScriptedDemonstrator(Task::kPushLite, mode, rng, opts);
      EXPECT_TRUE(ep.success) << "seed " << seed << " mode " << mode;
      int level = 0;
      for (const auto& s : ep.states) {
        if (std::abs(s.effector.y - s.block.y) <= opts.params.block_half) {
          ++level;
          if (mode == 0) EXPECT_LT(s.effector.x, s.block.x);
          if (mode == 1) EXPECT_GT(s.effector.x, s.block.x);
        }
      }
      EXPECT_GT(level, 0);
    }
  }
}

TEST(DemonstratorTest, SameSeedSameEpisode) {
  Rng a(12), b(12);
  const Episode x = ScriptedDemonstrator(Task::kPushLite, 1, a);
  const Episode y = ScriptedDemonstrator(Task::kPushLite, 1, b);
  EXPECT_EQ(x.actions, y.actions);
  EXPECT_EQ(x.final_state, y.final_state);
}

TEST(DemonstratorTest, HundredEpisodesPerModeSucceedAndClassify) {
  for (int mode : {0, 1}) {
    int ok = 0, agree = 0;
    for (std::uint64_t e = 0; e < 100; ++e) {
      Rng rng = Rng::ForStream(500 + static_cast<std::uint64_t>(mode), Stream::kData, e);
      const Episode ep = ScriptedDemonstrator(Task::kPushLite, mode, rng);
      ok += ep.success ? 1 : 0;
      agree += ClassifyPushMode(ep.states) == mode ? 1 : 0;
      EXPECT_LE(static_cast<int>(ep.actions.size()), 300);
      for (const auto& a : ep.actions) {
        EXPECT_LE(std::hypot(a[0], a[1]), 0.02 + 1e-15);
      }
    }
    EXPECT_EQ(ok, 100) << "mode " << mode;
    EXPECT_EQ(agree, 100) << "mode " << mode;
  }
}

TEST(DemonstratorTest, ToyEpisodeFollowsBranch) {
  Rng rng(2);
  for (int b : {0, 1, 2}) {
    const Episode ep = ScriptedDemonstrator(Task::kToy, b, rng);
    ASSERT_EQ(ep.actions.size(), 1u);
    const double x = ep.observations[0][0];
    EXPECT_EQ(b == 2, x <= 0.0);
    EXPECT_LT(std::abs(ep.actions[0][0] - ToyBranchValue(static_cast<ToyBranch>(b), x)), 0.1);
  }
  EXPECT_THROW(ScriptedDemonstrator(Task::kToy, 3, rng), PreconditionError);
  EXPECT_THROW(ScriptedDemonstrator(Task::kPushLite, 2, rng), PreconditionError);
}

TEST(DemonstratorTest, ModeRuleTiltsTowardNearerSide) {
  PushLiteState s = BaseState();
  s.effector.x = s.block.x;
  EXPECT_DOUBLE_EQ(RightModeProbability(s), 0.5);
  s.effector.x = s.block.x + 0.03;
  EXPECT_DOUBLE_EQ(RightModeProbability(s), 0.8);
  s.effector.x = s.block.x - 0.1;
  EXPECT_DOUBLE_EQ(RightModeProbability(s), 0.2);
}

TEST(DemonstratorTest, GeneratedEpisodesAreReproducible) {
  const auto a = GenPushLiteEpisodes(6, 3), b = GenPushLiteEpisodes(6, 3);
  for (std::size_t e = 0; e < 6; ++e) {
    EXPECT_EQ(a[e].actions, b[e].actions);
    EXPECT_EQ(a[e].mode, b[e].mode);
    EXPECT_TRUE(a[e].success);
  }
}

Episode Synthetic(std::size_t len) {
  Episode ep;
  for (std::size_t t = 0; t < len; ++t) {
    ep.observations.push_back({static_cast<double>(t), -static_cast<double>(t)});
    ep.actions.push_back({10.0 * static_cast<double>(t)});
  }
  return ep;
}

TEST(WindowTest, ExactLengthGivesOneWindow) {
  const auto d = EpisodesToDemos({Synthetic(4)}, Horizons{1, 4, 2});
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].actions.data(), (std::vector<double>{0, 10, 20, 30}));
}

TEST(WindowTest, CountArithmeticAndPadding) {
  for (std::size_t len : {16u, 17u, 20u, 40u, 123u}) {
    const Horizons hz{2, 16, 8};
    std::vector<int> idx;
    const auto d = EpisodesToDemos({Synthetic(len), Synthetic(len)}, hz, &idx);
    const std::size_t per = len - 16 + 1 + std::min<std::size_t>(7, len - 16);
    ASSERT_EQ(d.size(), 2 * per) << "len " << len;
    EXPECT_EQ(idx.front(), 0);
    EXPECT_EQ(idx.back(), 1);
    const Demo& last = d[per - 1];
    EXPECT_EQ(last.actions.at(15, 0), 10.0 * static_cast<double>(len - 1));
    EXPECT_EQ(last.observation.size(), 4u);
  }
}

TEST(WindowTest, FirstWindowPadsObservationsAndTakesFirstActions) {
  const auto eps = GenPushLiteEpisodes(1, 7);
  const Horizons hz{2, 16, 8};
  const auto d = EpisodesToDemos(eps, hz);
  ASSERT_FALSE(d.empty());
  for (std::size_t k = 0; k < 16; ++k) {
    EXPECT_EQ(d[0].actions.at(k, 0), eps[0].actions[k][0]);
    EXPECT_EQ(d[0].actions.at(k, 1), eps[0].actions[k][1]);
  }
  const auto& o0 = eps[0].observations[0];
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(d[0].observation[k], o0[k]);
    EXPECT_EQ(d[0].observation[8 + k], o0[k]);
  }
  EXPECT_EQ(d[1].observation[8], eps[0].observations[1][0]);
}

TEST(WindowTest, ShortEpisodesAreSkipped) {
  std::vector<int> idx;
  const auto d = EpisodesToDemos({Synthetic(3), Synthetic(5)}, Horizons{1, 4, 2}, &idx);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(idx, (std::vector<int>{1, 1, 1}));
}

}  // namespace
}  // namespace imle
