#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "imle/imle.hpp"
#include "imle/rng.hpp"

namespace imle {

enum class Task { kToy, kPushLite };

std::string TaskName(Task task);
Task ParseTask(const std::string& name);

// ---------------------------------------------------------------------------
// Toy branching function: a single trunk for x <= 0 that splits into an
// upper and a lower branch for x > 0.

enum class ToyBranch : int { kUpper = 0, kLower = 1, kShared = 2 };

// Mixing weights for demos whose x lies in (previous x_max, x_max].
struct BranchRegion {
  double x_max = 1.0;
  double w_upper = 0.5;
  double w_lower = 0.5;

  bool operator==(const BranchRegion&) const = default;
};

struct ToyBranchSpec {
  std::size_t n_demos = 20;
  double noise_std = 0.02;
  std::vector<BranchRegion> regions = {BranchRegion{}};
  std::uint64_t seed = 0;
  std::size_t pred_horizon = 16;  // y is tiled to [pred_horizon, 1]

  void Validate() const;
  bool operator==(const ToyBranchSpec&) const = default;
};

double ToyTrunk(double x);
double ToyUpper(double x);
double ToyLower(double x);
double ToyBranchValue(ToyBranch branch, double x);

struct ToyDataset {
  std::vector<Demo> demos;  // raw units; observation = [x]
  std::vector<ToyBranch> labels;
};

ToyDataset GenToyBranchDataset(const ToyBranchSpec& spec);

// |y - nearest branch(x)| < 3 * noise_std.
bool ToySuccess(double x, double y, double noise_std);

// ---------------------------------------------------------------------------
// PushLite: a disk effector pushes a square block on the unit arena.

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double Norm() const;
  bool operator==(const Vec2&) const = default;
};

struct PushLiteParams {
  double block_half = 0.05;      // half side length of the square block
  double effector_radius = 0.02;
  double max_step = 0.02;        // max effector displacement per step
  double rotation_gain = 0.5;    // dtheta = gain * cross(r, dp) / block_half^2
  double success_distance = 0.05;
  double success_angle = 0.2;
  int horizon_cap = 300;

  bool operator==(const PushLiteParams&) const = default;
};

struct PushLiteState {
  Vec2 effector;
  Vec2 block;
  double angle = 0.0;
  Vec2 target;
  double target_angle = 0.0;
  int t = 0;

  bool operator==(const PushLiteState&) const = default;
};

inline constexpr std::size_t kPushLiteObsDim = 8;
inline constexpr std::size_t kPushLiteActionDim = 2;

// Effector moves by the (norm-clipped) action, clamped to the arena; an
// overlapping block is pushed out along the contact normal and rotated in
// proportion to the contact offset.
PushLiteState PushLiteStep(const PushLiteState& state, Vec2 action,
                           const PushLiteParams& params = {});

// (effector xy, block xy, sin, cos of block angle, target xy)
std::array<double, kPushLiteObsDim> PushLiteObservation(const PushLiteState& s);

// Block in the lower half, target straight above it, effector between the
// block and the target.
PushLiteState PushLiteRandomInitialState(Rng& rng,
                                         const PushLiteParams& params = {});

// Mode probe layout: block at (0.5, 0.25), target at (0.5, 0.6), effector
// `effector_offset` to the right of the block center and 0.05 above contact.
PushLiteState PushLiteProbeState(double effector_offset,
                                 const PushLiteParams& params = {});

// Center distance < success_distance and |angle error| < success_angle.
bool PushLiteSuccess(const PushLiteState& s, const PushLiteParams& params = {});

bool InBounds(const PushLiteState& s);

enum class PushMode : int { kLeft = 0, kRight = 1 };

// Dataset mode rule: even split when the effector starts over the block
// center, tilting to 80/20 toward the nearer side at the edges.
double RightModeProbability(const PushLiteState& initial);
PushMode ModeForInitialState(const PushLiteState& initial, Rng& rng);

struct Episode {
  std::vector<std::vector<double>> observations;  // one per step
  std::vector<std::vector<double>> actions;       // one per step
  std::vector<PushLiteState> states;              // state before each action
  PushLiteState final_state;
  int mode = -1;
  bool success = false;
};

struct DemonstratorOptions {
  double jitter = 0.0075;  // per-step action noise std (arena units)
  PushLiteParams params;
};

// Waypoint follower: side-step around the block on the chosen side, drop
// below it, slide under its center, push it up to the target.
class PushLiteDemonstrator {
 public:
  PushLiteDemonstrator(PushMode mode, const PushLiteState& initial, Rng& rng,
                       DemonstratorOptions options = {});

  Vec2 NextAction(const PushLiteState& state, Rng& rng);
  bool done() const { return phase_ >= kDone; }
  PushMode mode() const { return mode_; }

 private:
  enum Phase { kSide = 0, kDescend, kUnder, kPush, kHold, kDone };

  PushMode mode_;
  DemonstratorOptions options_;
  double clearance_;
  double depth_;
  int phase_ = kSide;
  int hold_ = 0;
};

// For pushlite, `mode` is a PushMode value; for the toy task it is a
// ToyBranch value and the episode is a single (x, y) step.
Episode ScriptedDemonstrator(Task task, int mode, Rng& rng,
                             const DemonstratorOptions& options = {},
                             const ToyBranchSpec& toy = {});

// Side (left/right) the effector passes the block on, judged from the mean
// lateral offset while the effector is level with the block. -1 if never.
int ClassifyPushMode(const std::vector<PushLiteState>& states,
                     const PushLiteParams& params = {});

// n scripted episodes, modes from ModeForInitialState, episode e drawn from
// the kData stream e.
std::vector<Episode> GenPushLiteEpisodes(std::size_t n, std::uint64_t seed,
                                         const DemonstratorOptions& options = {});

// Sliding windows over each episode of length L, starts
// t = 0 .. L - T_p + min(T_a - 1, L - T_p): the T_o observations ending at t
// (earlier ones repeat the first) paired with actions t..t+T_p-1 (the final
// action repeats past the end). Episodes shorter than T_p are skipped.
// episode_index[i] receives the source episode of window i when non-null.
std::vector<Demo> EpisodesToDemos(const std::vector<Episode>& episodes,
                                  const Horizons& horizons,
                                  std::vector<int>* episode_index = nullptr);

}  // namespace imle
