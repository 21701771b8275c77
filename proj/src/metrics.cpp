#include "imle/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "imle/errors.hpp"

namespace imle {

ModeReport ModeCoverage(std::span<const DenseArray> samples,
                        const ModeClassifier& classify, std::size_t num_modes,
                        double min_fraction) {
  if (samples.empty()) throw PreconditionError("mode_coverage: no samples");
  if (num_modes == 0) throw PreconditionError("mode_coverage: no modes");
  ModeReport r;
  r.counts.assign(num_modes, 0);
  r.total = samples.size();
  for (const auto& s : samples) {
    const int mode = classify(s);
    if (mode == kUnassignedMode) {
      ++r.unassigned;
    } else if (mode >= 0 && static_cast<std::size_t>(mode) < num_modes) {
      ++r.counts[static_cast<std::size_t>(mode)];
    } else {
      throw PreconditionError("mode classifier returned out-of-range mode " +
                              std::to_string(mode));
    }
  }
  std::size_t covered = 0;
  for (std::size_t k = 0; k < num_modes; ++k) {
    const double f = static_cast<double>(r.counts[k]) / static_cast<double>(r.total);
    r.fractions.push_back(f);
    if (f >= min_fraction) ++covered;
  }
  r.recall = static_cast<double>(covered) / static_cast<double>(num_modes);
  r.collapse = covered < num_modes;
  return r;
}

double NnDistance(std::span<const DenseArray> set_a,
                  std::span<const DenseArray> set_b) {
  if (set_a.empty() || set_b.empty()) {
    throw PreconditionError("nn_distance: empty set");
  }
  double sum = 0.0;
  for (const auto& a : set_a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : set_b) best = std::min(best, EuclideanDistance(a, b));
    sum += best;
  }
  return sum / static_cast<double>(set_a.size());
}

double SymmetricNnDistance(std::span<const DenseArray> set_a,
                           std::span<const DenseArray> set_b) {
  return 0.5 * (NnDistance(set_a, set_b) + NnDistance(set_b, set_a));
}

ModeClassifier ToyModeClassifier(double x, double tolerance) {
  return [x, tolerance](const DenseArray& sample) {
    const auto v = sample.values();
    const double y =
        std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    const double du = std::abs(y - ToyUpper(x));
    const double dl = std::abs(y - ToyLower(x));
    if (std::min(du, dl) >= tolerance) return kUnassignedMode;
    return du <= dl ? static_cast<int>(ToyBranch::kUpper)
                    : static_cast<int>(ToyBranch::kLower);
  };
}

ModeClassifier PushLiteChunkClassifier(const PushLiteState& initial,
                                       const PushLiteParams& params) {
  return [initial, params](const DenseArray& chunk) {
    if (chunk.rank() != 2 || chunk.dim(1) != kPushLiteActionDim) {
      throw DimensionError("pushlite chunk must be [T_p, 2], got " +
                           ShapeString(chunk.shape()));
    }
    std::vector<PushLiteState> states{initial};
    for (std::size_t t = 0; t < chunk.dim(0); ++t) {
      states.push_back(
          PushLiteStep(states.back(), {chunk.at(t, 0), chunk.at(t, 1)}, params));
    }
    const int mode = ClassifyPushMode(states, params);
    return mode < 0 ? kUnassignedMode : mode;
  };
}

PolicyController::PolicyController(const Policy& policy, InferenceConfig cfg)
    : policy_(policy), cfg_(cfg), buffer_(policy.horizons.obs, policy.obs_dim()) {
  cfg_.Validate();
}

void PolicyController::Reset(const PushLiteState&, Rng&) { buffer_.Reset(); }

void PolicyController::Observe(const PushLiteState& state) {
  const auto obs = PushLiteObservation(state);
  buffer_.Push(obs);
}

std::vector<Vec2> PolicyController::Plan(const PushLiteState& state, Rng& rng,
                                         RolloutLog* log) {
  const ActResult r = Act(buffer_, policy_, cfg_, rng);
  std::vector<Vec2> out;
  for (std::size_t k = 0; k < r.actions.dim(0); ++k) {
    out.push_back({r.actions.at(k, 0), r.actions.at(k, 1)});
  }
  if (log) {
    RolloutRecord rec;
    rec.t = state.t;
    rec.reset = r.reset;
    rec.j_star = r.j_star;
    rec.overlap = r.overlap;
    rec.first_action.assign(r.actions.row(0).begin(), r.actions.row(0).end());
    log->records.push_back(std::move(rec));
  }
  return out;
}

ScriptedController::ScriptedController(DemonstratorOptions options)
    : options_(options) {}

void ScriptedController::Reset(const PushLiteState& initial, Rng& rng) {
  const PushMode mode = ModeForInitialState(initial, rng);
  demo_ = std::make_unique<PushLiteDemonstrator>(mode, initial, rng, options_);
}

std::vector<Vec2> ScriptedController::Plan(const PushLiteState& state, Rng& rng,
                                           RolloutLog* log) {
  const Vec2 a = demo_->NextAction(state, rng);
  if (log) {
    RolloutRecord rec;
    rec.t = state.t;
    rec.reset = state.t == 0;
    rec.first_action = {a.x, a.y};
    log->records.push_back(std::move(rec));
  }
  return {a};
}

std::vector<Vec2> RandomController::Plan(const PushLiteState& state, Rng& rng,
                                         RolloutLog* log) {
  const double r = params_.max_step * std::sqrt(rng.Uniform());
  const double th = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  const Vec2 a{r * std::cos(th), r * std::sin(th)};
  if (log) {
    RolloutRecord rec;
    rec.t = state.t;
    rec.first_action = {a.x, a.y};
    log->records.push_back(std::move(rec));
  }
  return {a};
}

RolloutResult RolloutSuccessRate(Controller& controller, int n_episodes,
                                 int max_steps, std::uint64_t seed,
                                 const PushLiteParams& params) {
  if (n_episodes < 1) throw PreconditionError("rollout: n_episodes must be >= 1");
  if (max_steps < 1) throw PreconditionError("rollout: max_steps must be >= 1");
  RolloutResult res;
  int successes = 0;
  for (int e = 0; e < n_episodes; ++e) {
    Rng init_rng = Rng::ForStream(seed, Stream::kEpisode, static_cast<std::uint64_t>(e));
    Rng rng = Rng::ForStream(seed, Stream::kPolicy, static_cast<std::uint64_t>(e));
    PushLiteState s = PushLiteRandomInitialState(init_rng, params);
    controller.Reset(s, rng);
    RolloutLog log;
    std::deque<Vec2> pending;
    std::vector<PushLiteState> visited;
    bool ok = false;
    int steps = 0;
    for (; steps < max_steps; ++steps) {
      controller.Observe(s);
      if (pending.empty()) {
        auto chunk = controller.Plan(s, rng, &log);
        pending.assign(chunk.begin(), chunk.end());
        if (pending.empty()) break;
      }
      visited.push_back(s);
      s = PushLiteStep(s, pending.front(), params);
      pending.pop_front();
      if (PushLiteSuccess(s, params)) {
        ok = true;
        ++steps;
        break;
      }
    }
    if (ok) ++successes;
    res.successes.push_back(ok);
    res.modes.push_back(ClassifyPushMode(visited, params));
    res.steps.push_back(steps);
    res.final_states.push_back(s);
    res.logs.push_back(std::move(log));
  }
  res.success_rate = static_cast<double>(successes) / static_cast<double>(n_episodes);
  return res;
}

LatencyReport BenchLatency(const std::function<void()>& generate,
                           int k_inner_steps, int runs) {
  if (runs < 1) throw PreconditionError("bench_latency: runs must be >= 1");
  for (int i = 0; i < kLatencyWarmup; ++i) generate();
  LatencyReport r;
  r.runs = runs;
  r.k_inner_steps = k_inner_steps;
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    generate();
    const auto t1 = std::chrono::steady_clock::now();
    r.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  r.mean_ms = std::accumulate(r.samples_ms.begin(), r.samples_ms.end(), 0.0) / runs;
  double var = 0.0;
  for (double v : r.samples_ms) var += (v - r.mean_ms) * (v - r.mean_ms);
  r.stddev_ms = runs > 1 ? std::sqrt(var / (runs - 1)) : 0.0;
  return r;
}

}  // namespace imle
