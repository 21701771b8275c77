#include <gtest/gtest.h>

#include <cmath>

#include "imle/errors.hpp"
#include "imle/flow_matching.hpp"
#include "oracles.hpp"

namespace imle {
namespace {

Demo MakeDemo(std::size_t t_p, std::size_t ad, std::size_t od, Rng& rng) {
  Demo d;
  for (std::size_t i = 0; i < od; ++i) d.observation.push_back(rng.Uniform(-1, 1));
  d.actions = DenseArray({t_p, ad});
  for (double& v : d.actions.values()) v = rng.Uniform(-1, 1);
  return d;
}

TrainConfig SmallConfig() {
  TrainConfig cfg;
  cfg.horizons = {1, 4, 2};
  cfg.hidden = {16, 16};
  return cfg;
}

// Linear velocity net whose output is -x_t + bias, ignoring obs and t.
GeneratorNet NegIdentityNet(const Demo& d) {
  const std::size_t w = d.actions.size();
  GeneratorNet net({w + d.observation.size() + 1, w}, OutputShape{d.actions.dim(0), d.actions.dim(1)},
                   NetKind::kVelocity);
  for (std::size_t i = 0; i < w; ++i) net.weights(0).at(i, i) = -1.0;
  return net;
}

TEST(FmLossTest, ExactVelocityGivesZeroLoss) {
  Rng rng(1);
  const Demo d = MakeDemo(4, 2, 3, rng);
  GeneratorNet net = NegIdentityNet(d);
  for (std::size_t i = 0; i < d.actions.size(); ++i) net.biases(0)[i] = d.actions[i];
  DenseArray x0(d.actions.shape());
  for (double& v : x0.values()) v = rng.Normal();
  // At t = 0, x_t = x0 and the net outputs A - x0.
  EXPECT_NEAR(FmLossAndGradAt(net, d, x0, 0.0).loss, 0.0, 1e-24);
}

TEST(FmLossTest, ZeroNetLossIsMeanSquareOfTarget) {
  Rng rng(2);
  const Demo d = MakeDemo(4, 1, 1, rng);
  GeneratorNet net({4 + 1 + 1, 8, 4}, OutputShape{4, 1}, NetKind::kVelocity);
  DenseArray x0(d.actions.shape());
  for (double& v : x0.values()) v = rng.Normal();
  double ms = 0.0;
  for (std::size_t i = 0; i < 4; ++i) ms += std::pow(d.actions[i] - x0[i], 2);
  ms /= 4.0;
  EXPECT_NEAR(FmLossAndGradAt(net, d, x0, 0.37).loss, ms, 1e-14);
}

TEST(FmLossTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(10 + s);
    const std::vector<Demo> ds = {MakeDemo(4, 2, 3, rng)};
    TrainConfig cfg = SmallConfig();
    cfg.seed = s;
    const GeneratorNet net = InitialVelocityNet(ds, cfg);
    ASSERT_EQ(net.input_width(), 8u + 3u + 1u);
    const FmStep step = FmLossAndGrad(net, ds[0], rng);
    auto loss = [&](const GeneratorNet& n) {
      return FmLossAndGradAt(n, ds[0], step.noise, step.t).loss;
    };
    EXPECT_LT(oracle::WorstProbeError(net, loss, step.grads.Flatten(), 100, s), 1e-4);
  }
}

TEST(FmLossTest, AccumulatingOverloadAddsGradient) {
  Rng rng(3);
  const std::vector<Demo> ds = {MakeDemo(4, 1, 1, rng)};
  const GeneratorNet net = InitialVelocityNet(ds, SmallConfig());
  Rng a(4), b(4);
  const FmStep plain = FmLossAndGrad(net, ds[0], a);
  ParameterSet acc = ParameterSet::ZerosLike(net.params());
  const FmStep into = FmLossAndGrad(net, ds[0], b, acc);
  EXPECT_EQ(plain.loss, into.loss);
  EXPECT_EQ(plain.t, into.t);
  EXPECT_EQ(acc, plain.grads);
}

TEST(FmSampleTest, SingleStepIsOneForward) {
  Rng rng(5);
  const std::vector<Demo> ds = {MakeDemo(4, 2, 3, rng)};
  const GeneratorNet net = InitialVelocityNet(ds, SmallConfig());
  DenseArray x0({4, 2});
  for (double& v : x0.values()) v = rng.Normal();
  std::vector<double> input(x0.data());
  input.insert(input.end(), ds[0].observation.begin(), ds[0].observation.end());
  input.push_back(0.0);
  const DenseArray v = ForwardInput(net, input);
  const DenseArray x1 = FmIntegrate(net, ds[0].observation, 1, x0);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(x1[i], x0[i] + v[i]);
}

TEST(FmSampleTest, ConstantVelocityIsExactForAnyStepCount) {
  GeneratorNet net({4 + 2 + 1, 16, 4}, OutputShape{4, 1}, NetKind::kVelocity);
  const std::vector<double> c = {0.5, -1.25, 2.0, 0.0};
  for (std::size_t i = 0; i < 4; ++i) net.biases(1)[i] = c[i];
  const std::vector<double> obs = {0.3, -0.3};
  Rng rng(6);
  for (int k : {1, 2, 7, 100}) {
    DenseArray x0({4, 1});
    for (double& v : x0.values()) v = rng.Normal();
    const DenseArray x = FmIntegrate(net, obs, k, x0);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(x[i], x0[i] + c[i], 1e-12) << "k " << k;
  }
  EXPECT_THROW(FmIntegrate(net, obs, 0, DenseArray({4, 1})), PreconditionError);
}

TEST(FmSampleTest, DeterministicGivenSeed) {
  Rng rng(5);
  const std::vector<Demo> ds = {MakeDemo(4, 2, 3, rng)};
  const GeneratorNet net = InitialVelocityNet(ds, SmallConfig());
  Rng a(8), b(8);
  EXPECT_EQ(FmSample(net, ds[0].observation, 10, a), FmSample(net, ds[0].observation, 10, b));
}

// Expected loss on fixed (x0, t) probes. The ideal velocity
// (A - x_t) / (1 - t) diverges at t = 1, so 2000 single-sample steps leave a
// residual of about 0.1.
TEST(FmTrainTest, MemorizesSingleDemo) {
  Rng rng(7);
  const std::vector<Demo> ds = {MakeDemo(4, 1, 1, rng)};
  TrainConfig cfg = SmallConfig();
  cfg.hidden = {32, 32};
  cfg.epochs = 2000;
  const GeneratorNet init = InitialVelocityNet(ds, cfg);
  const TrainResult r = TrainFlowMatching(ds, cfg);
  ASSERT_EQ(r.report.epochs.size(), 2000u);
  auto expected = [&](const GeneratorNet& net, double t_max) {
    Rng probe(99);
    double sum = 0.0;
    for (int i = 0; i < 2000; ++i) {
      DenseArray x0({4, 1});
      for (double& v : x0.values()) v = probe.Normal();
      sum += FmLossAndGradAt(net, ds[0], x0, t_max * (i + 0.5) / 2000.0).loss;
    }
    return sum / 2000.0;
  };
  EXPECT_LT(expected(r.net, 0.9), 0.1);
  EXPECT_LT(expected(r.net, 1.0), 0.15);
  EXPECT_LT(expected(r.net, 1.0), 0.1 * expected(init, 1.0));
  EXPECT_EQ(r.net.kind(), NetKind::kVelocity);
}

TEST(FmTrainTest, ZeroEpochsReturnsInitialization) {
  Rng rng(7);
  const std::vector<Demo> ds = {MakeDemo(4, 1, 1, rng)};
  TrainConfig cfg = SmallConfig();
  cfg.epochs = 0;
  EXPECT_EQ(TrainFlowMatching(ds, cfg).net, InitialVelocityNet(ds, cfg));
}

}  // namespace
}  // namespace imle
