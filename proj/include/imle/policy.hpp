#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "imle/imle.hpp"
#include "imle/nn.hpp"
#include "imle/rng.hpp"
#include "imle/tensor.hpp"

namespace imle {

// Per-dimension min/max scaling to [-1, 1].
struct Normalizer {
  std::vector<double> obs_min, obs_max;  // per observation dimension
  std::vector<double> act_min, act_max;  // per action dimension

  // Fits on raw demos whose observation is a stack of obs_dim-wide frames.
  // Constant dimensions are widened to [v - 1, v + 1] so max > min holds.
  static Normalizer Fit(const std::vector<Demo>& raw, std::size_t obs_dim);

  std::size_t obs_dim() const { return obs_min.size(); }
  std::size_t action_dim() const { return act_min.size(); }

  // Applies to a flat stack of frames (length multiple of obs_dim).
  std::vector<double> NormalizeObservation(std::span<const double> obs) const;
  std::vector<double> DenormalizeObservation(std::span<const double> obs) const;
  DenseArray NormalizeActions(const DenseArray& actions) const;
  DenseArray DenormalizeActions(const DenseArray& actions) const;

  Demo NormalizeDemo(const Demo& raw) const;
  std::vector<Demo> NormalizeDemos(const std::vector<Demo>& raw) const;

  bool operator==(const Normalizer&) const = default;
};

// A trained generator (or velocity net) packaged for inference.
struct Policy {
  GeneratorNet net;
  Normalizer normalizer;
  Horizons horizons;
  int flow_steps = 1;  // Euler steps when net.kind() == kVelocity

  std::size_t obs_dim() const { return normalizer.obs_dim(); }
  std::size_t action_dim() const { return normalizer.action_dim(); }
};

// Candidate generator used by Act(): (obs_window [T_o, obs_dim], m, rng) ->
// m raw-unit trajectories [T_p, action_dim].
using CandidateSource = std::function<std::vector<DenseArray>(
    const DenseArray& obs_window, std::size_t m, Rng& rng)>;

// candidate j = denormalize(T(z_j, normalize(obs_window))) with fresh z_j.
// Velocity-net policies integrate flow_steps Euler steps per candidate.
std::vector<DenseArray> GenerateBatch(const Policy& policy,
                                      const DenseArray& obs_window,
                                      std::size_t m, Rng& rng);

CandidateSource MakeCandidateSource(const Policy& policy);

struct InferenceConfig {
  std::size_t num_candidates = 20;  // m
  int reset_period = 10;            // C
  bool consistency = true;
  std::uint64_t seed = 0;

  void Validate() const;
  bool operator==(const InferenceConfig&) const = default;
};

// Last T_o observations plus the previously chosen trajectory.
class HorizonBuffer {
 public:
  HorizonBuffer(std::size_t obs_horizon, std::size_t obs_dim);

  // The first observation of an episode is repeated to fill the window.
  void Push(std::span<const double> observation);
  void Reset();

  bool ready() const { return !frames_.empty(); }
  std::size_t obs_horizon() const { return obs_horizon_; }
  DenseArray Window() const;  // [T_o, obs_dim]

  std::optional<DenseArray> a_prev;
  std::size_t steps_since_reset = 0;

 private:
  std::size_t obs_horizon_;
  std::size_t obs_dim_;
  std::deque<std::vector<double>> frames_;
};

struct OverlapChoice {
  std::size_t index = 0;
  double distance = 0.0;
};

// argmin_j d(a_prev[T_a:T_p], candidate_j[0:T_p - T_a]); lowest index wins
// ties. Requires T_p == 2 * T_a.
OverlapChoice SelectConsistent(std::span<const DenseArray> candidates,
                               const DenseArray& a_prev, std::size_t exec_horizon);

struct ActResult {
  DenseArray actions;  // [T_a, action_dim]
  DenseArray chosen;   // full [T_p, action_dim] trajectory
  std::size_t j_star = 0;
  bool reset = false;
  std::optional<double> overlap;
};

// One receding-horizon decision with temporal consistency. Uniform selection
// when consistency is off, when there is no previous trajectory, or when the
// reset counter wraps to 0; otherwise the overlap argmin. Mutates `buffer`.
ActResult Act(HorizonBuffer& buffer, const CandidateSource& source,
              const InferenceConfig& cfg, const Horizons& horizons, Rng& rng);

ActResult Act(HorizonBuffer& buffer, const Policy& policy,
              const InferenceConfig& cfg, Rng& rng);

struct RolloutRecord {
  int t = 0;  // environment step at which the chunk starts
  bool reset = false;
  std::size_t j_star = 0;
  std::optional<double> overlap;
  std::vector<double> first_action;
};

struct RolloutLog {
  std::vector<RolloutRecord> records;

  // Columns: t,reset_flag,j_star,overlap_distance,a0..a{action_dim-1}
  void WriteCsv(std::ostream& os) const;
};

}  // namespace imle
