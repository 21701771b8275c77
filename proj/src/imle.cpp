#include "imle/imle.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "imle/errors.hpp"
#include "training_loop.hpp"

namespace imle {

void TrainConfig::Validate() const {
  if (num_latents < 1) throw PreconditionError("num_latents must be >= 1");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw PreconditionError("epsilon must be finite and >= 0");
  }
  if (epochs < 0) throw PreconditionError("epochs must be >= 0");
  if (batch_size < 1) throw PreconditionError("batch_size must be >= 1");
  if (horizons.obs < 1 || horizons.pred < 1 || horizons.exec < 1) {
    throw PreconditionError("horizons must be >= 1");
  }
  if (horizons.exec > horizons.pred) {
    throw PreconditionError("execution horizon T_a must be <= T_p");
  }
  if (!(adam.lr >= 0.0)) throw PreconditionError("learning rate must be >= 0");
}

double EuclideanDistance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("euclidean_distance: sizes " +
                         std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " differ");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double EuclideanDistance(const DenseArray& a, const DenseArray& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("euclidean_distance: shapes " + ShapeString(a.shape()) +
                         " and " + ShapeString(b.shape()) + " differ");
  }
  return EuclideanDistance(a.values(), b.values());
}

std::vector<LatentVector> SampleLatents(Rng& rng, std::size_t m,
                                        std::size_t latent_dim) {
  if (m < 1) throw PreconditionError("sample_latents: m must be >= 1");
  std::vector<LatentVector> out(m);
  for (auto& z : out) {
    z.values.resize(latent_dim);
    for (double& v : z.values) v = rng.Normal();
  }
  return out;
}

SelectionResult SelectCandidate(std::span<const double> distances,
                                double epsilon) {
  if (distances.empty()) {
    throw PreconditionError("select_candidate: no candidates");
  }
  SelectionResult r;
  r.distances.assign(distances.begin(), distances.end());
  std::size_t best_valid = 0;
  double best_valid_d = std::numeric_limits<double>::infinity();
  std::size_t best_any = 0;
  double best_any_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < distances.size(); ++j) {
    const double d = distances[j];
    if (!std::isfinite(d) || d < 0.0) {
      throw NumericError("select_candidate: distance " + std::to_string(j) +
                         " is not finite and non-negative");
    }
    if (d < best_any_d) {
      best_any_d = d;
      best_any = j;
    }
    if (d >= epsilon) {
      r.valid_indices.push_back(j);
      if (d < best_valid_d) {
        best_valid_d = d;
        best_valid = j;
      }
    }
  }
  if (r.valid_indices.empty()) {
    r.fallback_used = true;
    r.chosen = best_any;
  } else {
    r.chosen = best_valid;
  }
  return r;
}

namespace {

ImleStep ImleStepInto(const GeneratorNet& net, const Demo& demo,
                      const TrainConfig& cfg, Rng& rng,
                      const ForwardObserver& observer, ParameterSet* accum) {
  const OutputShape out = net.output_shape();
  if (demo.actions.size() != out.width()) {
    throw DimensionError("demo actions " + ShapeString(demo.actions.shape()) +
                         " do not match net output [" +
                         std::to_string(out.horizon) + ", " +
                         std::to_string(out.action_dim) + "]");
  }
  const std::size_t latent_dim = cfg.ResolvedLatentDim(out);
  const std::size_t obs_dim = demo.observation.size();
  if (latent_dim + obs_dim != net.input_width()) {
    throw DimensionError("layer 0 expects input width " +
                         std::to_string(net.input_width()) + ", got " +
                         std::to_string(latent_dim + obs_dim));
  }

  ImleStep step;
  step.latents = SampleLatents(rng, cfg.num_latents, latent_dim);
  const std::size_t m = cfg.num_latents;
  const std::size_t width = net.input_width();
  DenseArray inputs({m, width});
  for (std::size_t j = 0; j < m; ++j) {
    auto row = inputs.row(j);
    std::copy(step.latents[j].values.begin(), step.latents[j].values.end(),
              row.begin());
    std::copy(demo.observation.begin(), demo.observation.end(),
              row.begin() + static_cast<std::ptrdiff_t>(latent_dim));
    if (observer) observer(row);
  }
  const DenseArray candidates = ForwardBatch(net, inputs);

  std::vector<double> distances(m);
  for (std::size_t j = 0; j < m; ++j) {
    distances[j] = EuclideanDistance(candidates.row(j), demo.actions.values());
  }
  step.selection = SelectCandidate(distances, cfg.epsilon);
  const std::size_t js = step.selection.chosen;
  step.loss = distances[js];

  // d/d(out) ||out - a|| = (out - a) / ||out - a||; zero at the kink.
  std::vector<double> out_grad(out.width(), 0.0);
  if (step.loss > 0.0) {
    auto cand = candidates.row(js);
    for (std::size_t k = 0; k < out_grad.size(); ++k) {
      out_grad[k] = (cand[k] - demo.actions[k]) / step.loss;
    }
  }
  if (accum == nullptr) {
    step.grads = ParameterSet::ZerosLike(net.params());
    accum = &step.grads;
  }
  AccumulateBackward(net, inputs.row(js), out_grad, *accum);
  return step;
}

}  // namespace

ImleStep ImleLossAndGrad(const GeneratorNet& net, const Demo& demo,
                         const TrainConfig& cfg, Rng& rng,
                         const ForwardObserver& observer) {
  return ImleStepInto(net, demo, cfg, rng, observer, nullptr);
}

ImleStep ImleLossAndGrad(const GeneratorNet& net, const Demo& demo,
                         const TrainConfig& cfg, Rng& rng, ParameterSet& accum,
                         const ForwardObserver& observer) {
  return ImleStepInto(net, demo, cfg, rng, observer, &accum);
}

void TrainingReport::WriteCsv(std::ostream& os, bool include_wall_time) const {
  const auto old_precision = os.precision(17);
  os << "epoch,mean_loss,mean_rejection_fraction,fallback_count,wall_ms\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << e.mean_loss << ',' << e.mean_rejection_fraction
       << ',' << e.fallback_count << ',';
    if (include_wall_time) os << e.wall_ms;
    os << '\n';
  }
  os.precision(old_precision);
}

GeneratorNet InitialGenerator(const std::vector<Demo>& dataset,
                              const TrainConfig& cfg) {
  detail::ValidateDataset(dataset);
  const Demo& d = dataset.front();
  const OutputShape out{d.actions.dim(0), d.actions.dim(1)};
  std::vector<std::size_t> sizes{cfg.ResolvedLatentDim(out) +
                                 d.observation.size()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(out.width());
  Rng rng = Rng::ForStream(cfg.seed, Stream::kInit);
  return GeneratorNet::Initialized(std::move(sizes), out, rng,
                                   NetKind::kGenerator);
}

TrainResult Train(GeneratorNet net, const std::vector<Demo>& dataset,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.Validate();
  detail::ValidateDataset(dataset);
  const double m = static_cast<double>(cfg.num_latents);
  TrainingReport report = detail::RunTrainingLoop(
      net, dataset, cfg, hooks,
      [&](const Demo& demo, Rng& rng, ParameterSet& accum) {
        const ImleStep s = ImleLossAndGrad(net, demo, cfg, rng, accum);
        detail::DemoStep out;
        out.loss = s.loss;
        out.rejection_fraction =
            (m - static_cast<double>(s.selection.valid_indices.size())) / m;
        out.fallback = s.selection.fallback_used;
        return out;
      });
  return {std::move(net), std::move(report)};
}

TrainResult Train(const std::vector<Demo>& dataset, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.Validate();
  return Train(InitialGenerator(dataset, cfg), dataset, cfg, hooks);
}

}  // namespace imle
