#include "imle/envs.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

#include "imle/errors.hpp"

namespace imle {

std::string TaskName(Task task) {
  return task == Task::kToy ? "toy" : "pushlite";
}

Task ParseTask(const std::string& name) {
  if (name == "toy") return Task::kToy;
  if (name == "pushlite") return Task::kPushLite;
  throw FormatError("unknown task '" + name + "'");
}

// --------------------------------------------------------------------------
// Toy branches

void ToyBranchSpec::Validate() const {
  if (n_demos < 2) throw PreconditionError("toy dataset needs n_demos >= 2");
  if (!(noise_std >= 0.0)) throw PreconditionError("noise_std must be >= 0");
  if (regions.empty()) throw PreconditionError("toy spec needs a region");
  if (pred_horizon < 1) throw PreconditionError("pred_horizon must be >= 1");
  double prev = 0.0;
  for (const auto& r : regions) {
    if (!(r.x_max > prev)) {
      throw PreconditionError("toy regions must have increasing x_max");
    }
    if (r.w_upper < 0.0 || r.w_lower < 0.0 ||
        std::abs(r.w_upper + r.w_lower - 1.0) > 1e-9) {
      throw PreconditionError("toy region weights must be >= 0 and sum to 1");
    }
    prev = r.x_max;
  }
  if (regions.back().x_max < 1.0) {
    throw PreconditionError("toy regions must cover (0, 1]");
  }
}

double ToyTrunk(double x) { return 0.2 * std::sin(std::numbers::pi * x); }

double ToyUpper(double x) { return ToyTrunk(x) + (x > 0.0 ? 0.7 * x : 0.0); }

double ToyLower(double x) { return ToyTrunk(x) - (x > 0.0 ? 0.7 * x : 0.0); }

double ToyBranchValue(ToyBranch branch, double x) {
  switch (branch) {
    case ToyBranch::kUpper:
      return ToyUpper(x);
    case ToyBranch::kLower:
      return ToyLower(x);
    case ToyBranch::kShared:
      return ToyTrunk(x);
  }
  return ToyTrunk(x);
}

namespace {

Demo ToyDemo(double x, double y, std::size_t horizon) {
  return Demo{{x}, DenseArray({horizon, 1}, y)};
}

const BranchRegion& RegionFor(const ToyBranchSpec& spec, double x) {
  for (const auto& r : spec.regions) {
    if (x <= r.x_max) return r;
  }
  return spec.regions.back();
}

}  // namespace

ToyDataset GenToyBranchDataset(const ToyBranchSpec& spec) {
  spec.Validate();
  Rng rng = Rng::ForStream(spec.seed, Stream::kData);
  std::vector<double> xs(spec.n_demos);
  for (double& x : xs) x = rng.Uniform(-1.0, 1.0);

  // Branches are drawn without replacement within each region, so every
  // region holds round(w_upper * count) upper demos.
  std::vector<ToyBranch> labels(spec.n_demos, ToyBranch::kShared);
  for (const BranchRegion& region : spec.regions) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] > 0.0 && &RegionFor(spec, xs[i]) == &region) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng.engine());
    const auto n_upper = static_cast<std::size_t>(
        std::lround(region.w_upper * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < members.size(); ++k) {
      labels[members[k]] = k < n_upper ? ToyBranch::kUpper : ToyBranch::kLower;
    }
  }

  ToyDataset ds;
  for (std::size_t i = 0; i < spec.n_demos; ++i) {
    const double y = ToyBranchValue(labels[i], xs[i]) + spec.noise_std * rng.Normal();
    ds.demos.push_back(ToyDemo(xs[i], y, spec.pred_horizon));
    ds.labels.push_back(labels[i]);
  }
  return ds;
}

bool ToySuccess(double x, double y, double noise_std) {
  const double d = std::min(std::abs(y - ToyUpper(x)), std::abs(y - ToyLower(x)));
  return d < 3.0 * noise_std;
}

// --------------------------------------------------------------------------
// PushLite

double Vec2::Norm() const { return std::hypot(x, y); }

namespace {

Vec2 Rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double Cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

double Clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Vec2 ClipNorm(Vec2 v, double max_norm) {
  const double n = v.Norm();
  if (n > max_norm && n > 0.0) return v * (max_norm / n);
  return v;
}

double SignOrPlus(double v) { return v < 0.0 ? -1.0 : 1.0; }

}  // namespace

PushLiteState PushLiteStep(const PushLiteState& state, Vec2 action,
                           const PushLiteParams& params) {
  PushLiteState next = state;
  next.t = state.t + 1;
  if (!std::isfinite(action.x) || !std::isfinite(action.y)) action = {};
  const Vec2 a = ClipNorm(action, params.max_step);
  next.effector = {Clamp01(state.effector.x + a.x),
                   Clamp01(state.effector.y + a.y)};

  const double h = params.block_half;
  const double r = params.effector_radius;
  const Vec2 q = Rotate(next.effector - next.block, -next.angle);

  Vec2 normal_local;    // block-to-effector direction, block frame
  Vec2 contact_local;   // contact point, block frame
  double depth = 0.0;   // distance the block has to move
  if (std::abs(q.x) <= h && std::abs(q.y) <= h) {
    const double pen_x = h - std::abs(q.x);
    const double pen_y = h - std::abs(q.y);
    if (pen_x < pen_y) {
      normal_local = {SignOrPlus(q.x), 0.0};
      contact_local = {SignOrPlus(q.x) * h, q.y};
      depth = pen_x + r;
    } else {
      normal_local = {0.0, SignOrPlus(q.y)};
      contact_local = {q.x, SignOrPlus(q.y) * h};
      depth = pen_y + r;
    }
  } else {
    const Vec2 closest{std::clamp(q.x, -h, h), std::clamp(q.y, -h, h)};
    const Vec2 diff = q - closest;
    const double d = diff.Norm();
    if (d >= r) return next;
    normal_local = diff * (1.0 / d);
    contact_local = closest;
    depth = r - d;
  }

  const Vec2 shift = Rotate(normal_local, next.angle) * (-depth);
  const Vec2 lever = Rotate(contact_local, next.angle);
  next.block = {Clamp01(next.block.x + shift.x), Clamp01(next.block.y + shift.y)};
  next.angle += params.rotation_gain * Cross(lever, shift) / (h * h);
  return next;
}

std::array<double, kPushLiteObsDim> PushLiteObservation(const PushLiteState& s) {
  return {s.effector.x, s.effector.y, s.block.x,  s.block.y,
          std::sin(s.angle), std::cos(s.angle), s.target.x, s.target.y};
}

PushLiteState PushLiteRandomInitialState(Rng& rng, const PushLiteParams& params) {
  PushLiteState s;
  s.block = {rng.Uniform(0.3, 0.7), rng.Uniform(0.2, 0.3)};
  s.angle = 0.0;
  s.target = {s.block.x, s.block.y + rng.Uniform(0.3, 0.4)};
  s.effector = {s.block.x + rng.Uniform(-0.03, 0.03),
                s.block.y + params.block_half + params.effector_radius +
                    rng.Uniform(0.03, 0.08)};
  return s;
}

PushLiteState PushLiteProbeState(double effector_offset,
                                 const PushLiteParams& params) {
  PushLiteState s;
  s.block = {0.5, 0.25};
  s.target = {0.5, 0.6};
  s.effector = {0.5 + effector_offset,
                0.25 + params.block_half + params.effector_radius + 0.05};
  return s;
}

bool PushLiteSuccess(const PushLiteState& s, const PushLiteParams& params) {
  const double dist = (s.block - s.target).Norm();
  const double dtheta =
      std::remainder(s.angle - s.target_angle, 2.0 * std::numbers::pi);
  return dist < params.success_distance && std::abs(dtheta) < params.success_angle;
}

bool InBounds(const PushLiteState& s) {
  auto in = [](Vec2 v) {
    return v.x >= 0.0 && v.x <= 1.0 && v.y >= 0.0 && v.y <= 1.0;
  };
  return in(s.effector) && in(s.block) && std::isfinite(s.angle);
}

PushLiteDemonstrator::PushLiteDemonstrator(PushMode mode,
                                           const PushLiteState& initial,
                                           Rng& rng, DemonstratorOptions options)
    : mode_(mode), options_(options) {
  clearance_ = rng.Uniform(0.02, 0.04);
  depth_ = rng.Uniform(0.02, 0.04);
  const double side_room = options_.params.block_half +
                           options_.params.effector_radius + clearance_;
  const double x = initial.block.x + (mode == PushMode::kLeft ? -side_room : side_room);
  const double y = initial.block.y - side_room;
  if (x < 0.0 || x > 1.0 || y < 0.0) {
    throw PreconditionError("demonstrator: block too close to the arena edge");
  }
}

Vec2 PushLiteDemonstrator::NextAction(const PushLiteState& s, Rng& rng) {
  const PushLiteParams& p = options_.params;
  const double side = mode_ == PushMode::kLeft ? -1.0 : 1.0;
  const double side_x = s.block.x + side * (p.block_half + p.effector_radius + clearance_);
  const double low_y = s.block.y - p.block_half - p.effector_radius - depth_;
  constexpr double kReach = 0.005;
  constexpr int kHoldSteps = 8;
  constexpr double kPushDone = 0.003;
  const double kOvershoot = 0.5 * p.success_distance;
  constexpr double kTiltGain = 3.0;
  constexpr double kMaxTilt = 0.15;

  Vec2 waypoint = s.effector;
  for (;;) {
    if (phase_ == kSide) {
      waypoint = {side_x, s.effector.y};
      if (std::abs(s.effector.x - side_x) < kReach) {
        phase_ = kDescend;
        continue;
      }
    } else if (phase_ == kDescend) {
      waypoint = {side_x, low_y};
      if ((waypoint - s.effector).Norm() < kReach) {
        phase_ = kUnder;
        continue;
      }
    } else if (phase_ == kUnder) {
      waypoint = {s.block.x, low_y};
      if ((waypoint - s.effector).Norm() < kReach) {
        phase_ = kPush;
        continue;
      }
    } else if (phase_ == kPush) {
      // Keep pushing past the target line while the angle still needs
      // correcting, within the success radius.
      const bool reached = s.block.y >= s.target.y - kPushDone;
      const bool square = std::abs(s.angle) < 0.5 * p.success_angle;
      if ((reached && square) || s.block.y >= s.target.y + kOvershoot) {
        phase_ = kHold;
        hold_ = 0;
        continue;
      }
      // Steer the contact offset along the bottom face so the block angle
      // tracks a tilt that walks the block back over the target line.
      const double tilt = std::clamp(kTiltGain * (s.block.x - s.target.x),
                                     -kMaxTilt, kMaxTilt);
      const double offset = std::clamp(
          (tilt - s.angle) * p.block_half * p.block_half /
              (4.0 * p.rotation_gain * p.max_step),
          -0.5 * p.block_half, 0.5 * p.block_half);
      waypoint = s.block + Rotate({offset, -(p.block_half + p.effector_radius) +
                                               p.max_step},
                                  s.angle);
    } else {
      // hold still for a few steps once the block sits on the target
      if (hold_ >= kHoldSteps) {
        phase_ = kDone;
        return {};
      }
      ++hold_;
      return {};
    }
    break;
  }
  Vec2 a = ClipNorm(waypoint - s.effector, p.max_step);
  if (options_.jitter > 0.0) {
    a = a + Vec2{options_.jitter * rng.Normal(), options_.jitter * rng.Normal()};
  }
  return ClipNorm(a, p.max_step);
}

Episode ScriptedDemonstrator(Task task, int mode, Rng& rng,
                             const DemonstratorOptions& options,
                             const ToyBranchSpec& toy) {
  Episode ep;
  ep.mode = mode;
  if (task == Task::kToy) {
    const auto branch = static_cast<ToyBranch>(mode);
    if (mode < 0 || mode > 2) throw PreconditionError("invalid toy branch");
    const double x = branch == ToyBranch::kShared ? rng.Uniform(-1.0, 0.0)
                                                  : rng.Uniform(1e-6, 1.0);
    const double y = ToyBranchValue(branch, x) + toy.noise_std * rng.Normal();
    ep.observations.push_back({x});
    ep.actions.push_back({y});
    ep.success = ToySuccess(x, y, toy.noise_std);
    return ep;
  }

  if (mode != 0 && mode != 1) throw PreconditionError("invalid push mode");
  const PushLiteParams& p = options.params;
  PushLiteState s = PushLiteRandomInitialState(rng, p);
  PushLiteDemonstrator demo(static_cast<PushMode>(mode), s, rng, options);
  while (!demo.done() && s.t < p.horizon_cap) {
    const Vec2 a = demo.NextAction(s, rng);
    if (demo.done()) break;
    const auto obs = PushLiteObservation(s);
    ep.states.push_back(s);
    ep.observations.emplace_back(obs.begin(), obs.end());
    ep.actions.push_back({a.x, a.y});
    s = PushLiteStep(s, a, p);
  }
  ep.final_state = s;
  ep.success = PushLiteSuccess(s, p);
  return ep;
}

double RightModeProbability(const PushLiteState& initial) {
  const double offset = std::clamp((initial.effector.x - initial.block.x) / 0.03,
                                   -1.0, 1.0);
  return 0.5 + 0.3 * offset;
}

PushMode ModeForInitialState(const PushLiteState& initial, Rng& rng) {
  return rng.Bernoulli(RightModeProbability(initial)) ? PushMode::kRight
                                                      : PushMode::kLeft;
}

std::vector<Episode> GenPushLiteEpisodes(std::size_t n, std::uint64_t seed,
                                         const DemonstratorOptions& options) {
  std::vector<Episode> out;
  out.reserve(n);
  for (std::size_t e = 0; e < n; ++e) {
    Rng rng = Rng::ForStream(seed, Stream::kData, e);
    Rng peek = rng;
    const PushLiteState initial = PushLiteRandomInitialState(peek, options.params);
    Rng mode_rng = Rng::ForStream(seed, Stream::kJitter, e);
    const PushMode mode = ModeForInitialState(initial, mode_rng);
    out.push_back(ScriptedDemonstrator(Task::kPushLite, static_cast<int>(mode),
                                       rng, options));
  }
  return out;
}

int ClassifyPushMode(const std::vector<PushLiteState>& states,
                     const PushLiteParams& params) {
  double sum = 0.0;
  int count = 0;
  for (const auto& s : states) {
    if (std::abs(s.effector.y - s.block.y) <= params.block_half) {
      sum += s.effector.x - s.block.x;
      ++count;
    }
  }
  if (count == 0 || sum == 0.0) return -1;
  return sum < 0.0 ? static_cast<int>(PushMode::kLeft)
                   : static_cast<int>(PushMode::kRight);
}

std::vector<Demo> EpisodesToDemos(const std::vector<Episode>& episodes,
                                  const Horizons& horizons,
                                  std::vector<int>* episode_index) {
  std::vector<Demo> out;
  if (episode_index) episode_index->clear();
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const Episode& ep = episodes[e];
    const std::size_t len = ep.actions.size();
    if (len < horizons.pred) {
      std::cerr << "warning: episode " << e << " has " << len
                << " steps (< T_p = " << horizons.pred << "), skipped\n";
      continue;
    }
    if (ep.observations.size() != len) {
      throw DimensionError("episode observation/action counts differ");
    }
    const std::size_t obs_dim = ep.observations.front().size();
    const std::size_t act_dim = ep.actions.front().size();
    const std::size_t padded = std::min(horizons.exec - 1, len - horizons.pred);
    const std::size_t last_start = len - horizons.pred + padded;
    for (std::size_t t = 0; t <= last_start; ++t) {
      Demo d;
      d.observation.reserve(horizons.obs * obs_dim);
      for (std::size_t k = 0; k < horizons.obs; ++k) {
        const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(t) -
                                   static_cast<std::ptrdiff_t>(horizons.obs) + 1 +
                                   static_cast<std::ptrdiff_t>(k);
        const auto& frame = ep.observations[static_cast<std::size_t>(
            std::max<std::ptrdiff_t>(idx, 0))];
        d.observation.insert(d.observation.end(), frame.begin(), frame.end());
      }
      d.actions = DenseArray({horizons.pred, act_dim});
      for (std::size_t k = 0; k < horizons.pred; ++k) {
        const auto& a = ep.actions[std::min(t + k, len - 1)];
        std::copy(a.begin(), a.end(), d.actions.row(k).begin());
      }
      out.push_back(std::move(d));
      if (episode_index) episode_index->push_back(static_cast<int>(e));
    }
  }
  return out;
}

}  // namespace imle
