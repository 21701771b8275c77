#pragma once

#include <vector>

#include "imle/imle.hpp"
#include "imle/nn.hpp"

namespace imle {

// Velocity nets reuse GeneratorNet with NetKind::kVelocity. Input layout:
// [x_t (T_p * action_dim), observation, t].

struct FmStep {
  double loss = 0.0;
  ParameterSet grads;
  DenseArray noise;  // x0
  double t = 0.0;
};

// Rectified-flow objective for one demo: x0 ~ N(0, I), t ~ U[0, 1],
// x_t = (1 - t) x0 + t A, loss = mean((v(x_t, obs, t) - (A - x0))^2).
FmStep FmLossAndGrad(const GeneratorNet& net, const Demo& demo, Rng& rng);

// Same objective with x0 and t supplied by the caller.
FmStep FmLossAndGradAt(const GeneratorNet& net, const Demo& demo,
                       const DenseArray& noise, double t);

// Both variants add the gradient into `accum` instead (grads left empty).
FmStep FmLossAndGrad(const GeneratorNet& net, const Demo& demo, Rng& rng,
                     ParameterSet& accum);
FmStep FmLossAndGradAt(const GeneratorNet& net, const Demo& demo,
                       const DenseArray& noise, double t, ParameterSet& accum);

// k-step Euler integration from x0 ~ N(0, I): x <- x + v(x, i/k, obs) / k.
DenseArray FmSample(const GeneratorNet& net, std::span<const double> obs,
                    int steps, Rng& rng);

// Euler integration from a given x0.
DenseArray FmIntegrate(const GeneratorNet& net, std::span<const double> obs,
                       int steps, DenseArray x0);

GeneratorNet InitialVelocityNet(const std::vector<Demo>& dataset,
                                const TrainConfig& cfg);

// Same epoch/batch/optimizer schedule as Train(); num_latents and epsilon are
// unused.
TrainResult TrainFlowMatching(const std::vector<Demo>& dataset,
                              const TrainConfig& cfg,
                              const TrainHooks& hooks = {});

}  // namespace imle
