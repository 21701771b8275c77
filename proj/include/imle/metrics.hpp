#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "imle/envs.hpp"
#include "imle/policy.hpp"
#include "imle/tensor.hpp"

namespace imle {

inline constexpr int kUnassignedMode = -1;

// Returns a mode index in [0, num_modes) or kUnassignedMode for samples that
// sit on no ground-truth mode.
using ModeClassifier = std::function<int(const DenseArray& sample)>;

struct ModeReport {
  std::vector<std::size_t> counts;  // per ground-truth mode
  std::size_t unassigned = 0;       // counts + unassigned == total
  std::size_t total = 0;
  std::vector<double> fractions;    // counts / total
  double recall = 0.0;              // fraction of modes with fraction >= min
  bool collapse = false;            // some mode below min_fraction
  std::optional<double> nn_distance;
};

ModeReport ModeCoverage(std::span<const DenseArray> samples,
                        const ModeClassifier& classify, std::size_t num_modes,
                        double min_fraction = 0.15);

// Mean over a of the distance to the nearest element of b.
double NnDistance(std::span<const DenseArray> set_a,
                  std::span<const DenseArray> set_b);
// Average of both directions.
double SymmetricNnDistance(std::span<const DenseArray> set_a,
                           std::span<const DenseArray> set_b);

// Toy classifier on the mean of a tiled [T_p, 1] sample: the nearer branch
// if within `tolerance` of it, otherwise unassigned.
ModeClassifier ToyModeClassifier(double x, double tolerance);

// Plays a raw [T_p, 2] action chunk from `initial` and labels it with
// ClassifyPushMode; unassigned if the effector never comes level with the
// block.
ModeClassifier PushLiteChunkClassifier(const PushLiteState& initial,
                                       const PushLiteParams& params = {});

// Closed-loop controller for PushLite rollouts.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void Reset(const PushLiteState& initial, Rng& rng) = 0;
  // Called once per environment step before any action is taken.
  virtual void Observe(const PushLiteState& state) = 0;
  // Called when the action queue is empty; returns the next action chunk.
  virtual std::vector<Vec2> Plan(const PushLiteState& state, Rng& rng,
                                 RolloutLog* log) = 0;
};

// Learned policy with receding-horizon execution of T_a actions per plan.
class PolicyController : public Controller {
 public:
  PolicyController(const Policy& policy, InferenceConfig cfg);
  void Reset(const PushLiteState& initial, Rng& rng) override;
  void Observe(const PushLiteState& state) override;
  std::vector<Vec2> Plan(const PushLiteState& state, Rng& rng,
                         RolloutLog* log) override;

 private:
  const Policy& policy_;
  InferenceConfig cfg_;
  HorizonBuffer buffer_;
};

// Mode picked per episode with ModeForInitialState.
class ScriptedController : public Controller {
 public:
  explicit ScriptedController(DemonstratorOptions options = {});
  void Reset(const PushLiteState& initial, Rng& rng) override;
  void Observe(const PushLiteState&) override {}
  std::vector<Vec2> Plan(const PushLiteState& state, Rng& rng,
                         RolloutLog* log) override;

 private:
  DemonstratorOptions options_;
  std::unique_ptr<PushLiteDemonstrator> demo_;
};

// Uniform actions in the max-step disk.
class RandomController : public Controller {
 public:
  explicit RandomController(PushLiteParams params = {}) : params_(params) {}
  void Reset(const PushLiteState&, Rng&) override {}
  void Observe(const PushLiteState&) override {}
  std::vector<Vec2> Plan(const PushLiteState& state, Rng& rng,
                         RolloutLog* log) override;

 private:
  PushLiteParams params_;
};

struct RolloutResult {
  double success_rate = 0.0;
  std::vector<bool> successes;
  std::vector<int> modes;       // ClassifyPushMode per episode
  std::vector<int> steps;       // steps taken per episode
  std::vector<PushLiteState> final_states;
  std::vector<RolloutLog> logs;
};

// Episode e starts from PushLiteRandomInitialState(kEpisode stream e) and uses
// the kPolicy stream e for the controller; stops at success or max_steps.
RolloutResult RolloutSuccessRate(Controller& controller, int n_episodes,
                                 int max_steps, std::uint64_t seed,
                                 const PushLiteParams& params = {});

struct LatencyReport {
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  int runs = 0;
  int k_inner_steps = 1;
  std::vector<double> samples_ms;
};

inline constexpr int kLatencyRuns = 30;
inline constexpr int kLatencyWarmup = 3;

// Times `generate` end to end: kLatencyWarmup untimed calls, then `runs`
// timed calls on the calling thread.
LatencyReport BenchLatency(const std::function<void()>& generate,
                           int k_inner_steps, int runs = kLatencyRuns);

}  // namespace imle
