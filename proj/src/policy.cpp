#include "imle/policy.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <string>

#include "imle/errors.hpp"
#include "imle/flow_matching.hpp"

namespace imle {

namespace {

double ToUnit(double v, double lo, double hi) {
  return 2.0 * (v - lo) / (hi - lo) - 1.0;
}

double FromUnit(double v, double lo, double hi) {
  return (v + 1.0) * 0.5 * (hi - lo) + lo;
}

void Widen(std::vector<double>& lo, std::vector<double>& hi) {
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(hi[i] - lo[i] > 1e-9)) {
      lo[i] -= 1.0;
      hi[i] += 1.0;
    }
  }
}

}  // namespace

Normalizer Normalizer::Fit(const std::vector<Demo>& raw, std::size_t obs_dim) {
  if (raw.empty()) throw PreconditionError("Normalizer::Fit: no demos");
  if (obs_dim == 0 || raw.front().observation.size() % obs_dim != 0) {
    throw DimensionError("observation length is not a multiple of obs_dim");
  }
  const std::size_t act_dim = raw.front().actions.dim(1);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Normalizer n;
  n.obs_min.assign(obs_dim, kInf);
  n.obs_max.assign(obs_dim, -kInf);
  n.act_min.assign(act_dim, kInf);
  n.act_max.assign(act_dim, -kInf);
  for (const Demo& d : raw) {
    for (std::size_t i = 0; i < d.observation.size(); ++i) {
      const std::size_t k = i % obs_dim;
      n.obs_min[k] = std::min(n.obs_min[k], d.observation[i]);
      n.obs_max[k] = std::max(n.obs_max[k], d.observation[i]);
    }
    for (std::size_t i = 0; i < d.actions.size(); ++i) {
      const std::size_t k = i % act_dim;
      n.act_min[k] = std::min(n.act_min[k], d.actions[i]);
      n.act_max[k] = std::max(n.act_max[k], d.actions[i]);
    }
  }
  Widen(n.obs_min, n.obs_max);
  Widen(n.act_min, n.act_max);
  return n;
}

std::vector<double> Normalizer::NormalizeObservation(
    std::span<const double> obs) const {
  if (obs.size() % obs_dim() != 0) {
    throw DimensionError("observation length is not a multiple of obs_dim");
  }
  std::vector<double> out(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const std::size_t k = i % obs_dim();
    out[i] = ToUnit(obs[i], obs_min[k], obs_max[k]);
  }
  return out;
}

std::vector<double> Normalizer::DenormalizeObservation(
    std::span<const double> obs) const {
  if (obs.size() % obs_dim() != 0) {
    throw DimensionError("observation length is not a multiple of obs_dim");
  }
  std::vector<double> out(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const std::size_t k = i % obs_dim();
    out[i] = FromUnit(obs[i], obs_min[k], obs_max[k]);
  }
  return out;
}

DenseArray Normalizer::NormalizeActions(const DenseArray& actions) const {
  if (actions.rank() != 2 || actions.dim(1) != action_dim()) {
    throw DimensionError("actions " + ShapeString(actions.shape()) +
                         " do not have action_dim " +
                         std::to_string(action_dim()));
  }
  DenseArray out = actions;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t k = i % action_dim();
    out[i] = ToUnit(out[i], act_min[k], act_max[k]);
  }
  return out;
}

DenseArray Normalizer::DenormalizeActions(const DenseArray& actions) const {
  if (actions.rank() != 2 || actions.dim(1) != action_dim()) {
    throw DimensionError("actions " + ShapeString(actions.shape()) +
                         " do not have action_dim " +
                         std::to_string(action_dim()));
  }
  DenseArray out = actions;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t k = i % action_dim();
    out[i] = FromUnit(out[i], act_min[k], act_max[k]);
  }
  return out;
}

Demo Normalizer::NormalizeDemo(const Demo& raw) const {
  return Demo{NormalizeObservation(raw.observation),
              NormalizeActions(raw.actions)};
}

std::vector<Demo> Normalizer::NormalizeDemos(const std::vector<Demo>& raw) const {
  std::vector<Demo> out;
  out.reserve(raw.size());
  for (const Demo& d : raw) out.push_back(NormalizeDemo(d));
  return out;
}

std::vector<DenseArray> GenerateBatch(const Policy& policy,
                                      const DenseArray& obs_window,
                                      std::size_t m, Rng& rng) {
  if (m < 1) throw PreconditionError("generate_batch: m must be >= 1");
  if (obs_window.rank() != 2 || obs_window.dim(0) != policy.horizons.obs ||
      obs_window.dim(1) != policy.obs_dim()) {
    throw DimensionError("observation window " +
                         ShapeString(obs_window.shape()) + " expected [" +
                         std::to_string(policy.horizons.obs) + ", " +
                         std::to_string(policy.obs_dim()) + "]");
  }
  const std::vector<double> obs =
      policy.normalizer.NormalizeObservation(obs_window.values());
  const GeneratorNet& net = policy.net;
  std::vector<DenseArray> out;
  out.reserve(m);

  if (net.kind() == NetKind::kVelocity) {
    for (std::size_t j = 0; j < m; ++j) {
      out.push_back(policy.normalizer.DenormalizeActions(
          FmSample(net, obs, policy.flow_steps, rng)));
    }
    return out;
  }

  if (obs.size() > net.input_width()) {
    throw DimensionError("observation wider than the generator input");
  }
  const std::size_t latent_dim = net.input_width() - obs.size();
  const auto latents = SampleLatents(rng, m, latent_dim);
  DenseArray inputs({m, net.input_width()});
  for (std::size_t j = 0; j < m; ++j) {
    auto row = inputs.row(j);
    std::copy(latents[j].values.begin(), latents[j].values.end(), row.begin());
    std::copy(obs.begin(), obs.end(),
              row.begin() + static_cast<std::ptrdiff_t>(latent_dim));
  }
  const DenseArray batch = ForwardBatch(net, inputs);
  const OutputShape shape = net.output_shape();
  for (std::size_t j = 0; j < m; ++j) {
    auto r = batch.row(j);
    DenseArray traj({shape.horizon, shape.action_dim},
                    std::vector<double>(r.begin(), r.end()));
    out.push_back(policy.normalizer.DenormalizeActions(traj));
  }
  return out;
}

CandidateSource MakeCandidateSource(const Policy& policy) {
  return [&policy](const DenseArray& window, std::size_t m, Rng& rng) {
    return GenerateBatch(policy, window, m, rng);
  };
}

void InferenceConfig::Validate() const {
  if (num_candidates < 1) throw PreconditionError("num_candidates must be >= 1");
  if (reset_period < 1) throw PreconditionError("reset_period must be >= 1");
}

HorizonBuffer::HorizonBuffer(std::size_t obs_horizon, std::size_t obs_dim)
    : obs_horizon_(obs_horizon), obs_dim_(obs_dim) {
  if (obs_horizon < 1) throw PreconditionError("observation horizon must be >= 1");
}

void HorizonBuffer::Push(std::span<const double> observation) {
  if (observation.size() != obs_dim_) {
    throw DimensionError("observation has " + std::to_string(observation.size()) +
                         " values, expected " + std::to_string(obs_dim_));
  }
  std::vector<double> frame(observation.begin(), observation.end());
  if (frames_.empty()) {
    frames_.assign(obs_horizon_, frame);
    return;
  }
  frames_.pop_front();
  frames_.push_back(std::move(frame));
}

void HorizonBuffer::Reset() {
  frames_.clear();
  a_prev.reset();
  steps_since_reset = 0;
}

DenseArray HorizonBuffer::Window() const {
  if (frames_.empty()) throw PreconditionError("horizon buffer is empty");
  DenseArray w({obs_horizon_, obs_dim_});
  for (std::size_t r = 0; r < obs_horizon_; ++r) {
    std::copy(frames_[r].begin(), frames_[r].end(), w.row(r).begin());
  }
  return w;
}

OverlapChoice SelectConsistent(std::span<const DenseArray> candidates,
                               const DenseArray& a_prev,
                               std::size_t exec_horizon) {
  if (candidates.empty()) throw PreconditionError("select_consistent: no candidates");
  if (a_prev.rank() != 2) throw DimensionError("a_prev must be [T_p, action_dim]");
  const std::size_t pred = a_prev.dim(0);
  const std::size_t act_dim = a_prev.dim(1);
  if (exec_horizon > pred || pred - exec_horizon != exec_horizon) {
    throw PreconditionError(
        "select_consistent: overlap needs T_p == 2 * T_a (T_p = " +
        std::to_string(pred) + ", T_a = " + std::to_string(exec_horizon) + ")");
  }
  const std::size_t overlap = pred - exec_horizon;
  const auto tail = a_prev.values().subspan(exec_horizon * act_dim, overlap * act_dim);
  OverlapChoice best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (candidates[j].shape() != a_prev.shape()) {
      throw DimensionError("candidate " + std::to_string(j) + " shape " +
                           ShapeString(candidates[j].shape()) +
                           " differs from a_prev");
    }
    const double d = EuclideanDistance(
        tail, candidates[j].values().subspan(0, overlap * act_dim));
    if (d < best.distance) best = {j, d};
  }
  return best;
}

ActResult Act(HorizonBuffer& buffer, const CandidateSource& source,
              const InferenceConfig& cfg, const Horizons& horizons, Rng& rng) {
  cfg.Validate();
  if (!buffer.ready()) throw PreconditionError("act: horizon buffer is empty");
  if (cfg.consistency && horizons.pred != 2 * horizons.exec) {
    throw PreconditionError("temporal consistency requires T_p == 2 * T_a");
  }
  std::vector<DenseArray> candidates =
      source(buffer.Window(), cfg.num_candidates, rng);
  if (candidates.size() != cfg.num_candidates) {
    throw DimensionError("candidate source returned " +
                         std::to_string(candidates.size()) + " trajectories");
  }

  ActResult r;
  r.reset = !cfg.consistency || !buffer.a_prev.has_value() ||
            buffer.steps_since_reset == 0;
  if (r.reset) {
    r.j_star = candidates.size() > 1 ? rng.Index(candidates.size()) : 0;
  } else {
    const OverlapChoice c =
        SelectConsistent(candidates, *buffer.a_prev, horizons.exec);
    r.j_star = c.index;
    r.overlap = c.distance;
  }
  r.chosen = std::move(candidates[r.j_star]);
  if (r.chosen.rank() != 2 || r.chosen.dim(0) < horizons.exec) {
    throw DimensionError("candidate shorter than the execution horizon");
  }
  const std::size_t act_dim = r.chosen.dim(1);
  auto head = r.chosen.values().subspan(0, horizons.exec * act_dim);
  r.actions = DenseArray({horizons.exec, act_dim},
                         std::vector<double>(head.begin(), head.end()));

  buffer.a_prev = r.chosen;
  buffer.steps_since_reset =
      (buffer.steps_since_reset + 1) % static_cast<std::size_t>(cfg.reset_period);
  return r;
}

ActResult Act(HorizonBuffer& buffer, const Policy& policy,
              const InferenceConfig& cfg, Rng& rng) {
  return Act(buffer, MakeCandidateSource(policy), cfg, policy.horizons, rng);
}

void RolloutLog::WriteCsv(std::ostream& os) const {
  const auto old_precision = os.precision(17);
  const std::size_t act_dim =
      records.empty() ? 0 : records.front().first_action.size();
  os << "t,reset_flag,j_star,overlap_distance";
  for (std::size_t k = 0; k < act_dim; ++k) os << ",a" << k;
  os << '\n';
  for (const auto& r : records) {
    os << r.t << ',' << (r.reset ? 1 : 0) << ',' << r.j_star << ',';
    if (r.overlap) os << *r.overlap;
    for (double v : r.first_action) os << ',' << v;
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace imle
