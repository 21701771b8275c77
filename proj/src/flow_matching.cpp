#include "imle/flow_matching.hpp"

#include <string>

#include "imle/errors.hpp"
#include "training_loop.hpp"

namespace imle {

namespace {

void CheckVelocityNet(const GeneratorNet& net, std::size_t obs_dim) {
  const std::size_t expected = net.output_width() + obs_dim + 1;
  if (net.input_width() != expected) {
    throw DimensionError("velocity net: layer 0 expects input width " +
                         std::to_string(net.input_width()) +
                         ", action + observation + time = " +
                         std::to_string(expected));
  }
}

std::vector<double> VelocityInput(std::span<const double> x,
                                  std::span<const double> obs, double t) {
  std::vector<double> in(x.begin(), x.end());
  in.insert(in.end(), obs.begin(), obs.end());
  in.push_back(t);
  return in;
}

}  // namespace

namespace {

FmStep FmStepInto(const GeneratorNet& net, const Demo& demo,
                  const DenseArray& noise, double t, ParameterSet* accum) {
  CheckVelocityNet(net, demo.observation.size());
  if (demo.actions.size() != net.output_width() ||
      noise.size() != net.output_width()) {
    throw DimensionError("flow matching: action/noise width does not match net");
  }
  const std::size_t n = net.output_width();
  std::vector<double> xt(n);
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    xt[i] = (1.0 - t) * noise[i] + t * demo.actions[i];
    target[i] = demo.actions[i] - noise[i];
  }
  const std::vector<double> input = VelocityInput(xt, demo.observation, t);
  const DenseArray v = ForwardInput(net, input);

  FmStep step;
  step.noise = noise;
  step.t = t;
  std::vector<double> out_grad(n);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = v[i] - target[i];
    sq += r * r;
    out_grad[i] = 2.0 * r / static_cast<double>(n);
  }
  step.loss = sq / static_cast<double>(n);
  if (accum == nullptr) {
    step.grads = ParameterSet::ZerosLike(net.params());
    accum = &step.grads;
  }
  AccumulateBackward(net, input, out_grad, *accum);
  return step;
}

DenseArray DrawNoise(const Demo& demo, Rng& rng) {
  DenseArray noise(demo.actions.shape());
  for (double& v : noise.values()) v = rng.Normal();
  return noise;
}

}  // namespace

FmStep FmLossAndGradAt(const GeneratorNet& net, const Demo& demo,
                       const DenseArray& noise, double t) {
  return FmStepInto(net, demo, noise, t, nullptr);
}

FmStep FmLossAndGradAt(const GeneratorNet& net, const Demo& demo,
                       const DenseArray& noise, double t, ParameterSet& accum) {
  return FmStepInto(net, demo, noise, t, &accum);
}

FmStep FmLossAndGrad(const GeneratorNet& net, const Demo& demo, Rng& rng) {
  const DenseArray noise = DrawNoise(demo, rng);
  const double t = rng.Uniform(0.0, 1.0);
  return FmStepInto(net, demo, noise, t, nullptr);
}

FmStep FmLossAndGrad(const GeneratorNet& net, const Demo& demo, Rng& rng,
                     ParameterSet& accum) {
  const DenseArray noise = DrawNoise(demo, rng);
  const double t = rng.Uniform(0.0, 1.0);
  return FmStepInto(net, demo, noise, t, &accum);
}

DenseArray FmIntegrate(const GeneratorNet& net, std::span<const double> obs,
                       int steps, DenseArray x0) {
  if (steps < 1) throw PreconditionError("fm_sample: steps must be >= 1");
  CheckVelocityNet(net, obs.size());
  const OutputShape shape = net.output_shape();
  DenseArray x = x0.Reshaped({shape.horizon, shape.action_dim});
  const double dt = 1.0 / static_cast<double>(steps);
  std::vector<double> input(net.input_width());
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    std::copy(x.values().begin(), x.values().end(), input.begin());
    std::copy(obs.begin(), obs.end(),
              input.begin() + static_cast<std::ptrdiff_t>(x.size()));
    input.back() = t;
    const DenseArray v = ForwardInput(net, input);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += dt * v[k];
  }
  return x;
}

DenseArray FmSample(const GeneratorNet& net, std::span<const double> obs,
                    int steps, Rng& rng) {
  if (steps < 1) throw PreconditionError("fm_sample: steps must be >= 1");
  const OutputShape shape = net.output_shape();
  DenseArray x0({shape.horizon, shape.action_dim});
  for (double& v : x0.values()) v = rng.Normal();
  return FmIntegrate(net, obs, steps, std::move(x0));
}

GeneratorNet InitialVelocityNet(const std::vector<Demo>& dataset,
                                const TrainConfig& cfg) {
  detail::ValidateDataset(dataset);
  const Demo& d = dataset.front();
  const OutputShape out{d.actions.dim(0), d.actions.dim(1)};
  std::vector<std::size_t> sizes{out.width() + d.observation.size() + 1};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(out.width());
  Rng rng = Rng::ForStream(cfg.seed, Stream::kInit);
  return GeneratorNet::Initialized(std::move(sizes), out, rng,
                                   NetKind::kVelocity);
}

TrainResult TrainFlowMatching(const std::vector<Demo>& dataset,
                              const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.Validate();
  GeneratorNet net = InitialVelocityNet(dataset, cfg);
  TrainingReport report = detail::RunTrainingLoop(
      net, dataset, cfg, hooks,
      [&](const Demo& demo, Rng& rng, ParameterSet& accum) {
        const FmStep s = FmLossAndGrad(net, demo, rng, accum);
        detail::DemoStep out;
        out.loss = s.loss;
        return out;
      });
  return {std::move(net), std::move(report)};
}

}  // namespace imle
