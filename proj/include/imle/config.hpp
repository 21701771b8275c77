#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "imle/envs.hpp"
#include "imle/imle.hpp"
#include "imle/policy.hpp"

namespace imle {

// Malformed or inconsistent run configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Method : int { kImle = 0, kImleNoConsistency, kFm1, kFmK };

std::string MethodName(Method method);
Method ParseMethod(std::string_view name);  // throws ConfigError
bool IsFlowMethod(Method method);

struct RunConfig {
  Task task = Task::kToy;
  Method method = Method::kImle;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::size_t n_demos = 20;  // toy demos or pushlite episodes
  double fraction = 1.0;     // nested subset of the dataset used for training
  int fm_steps = 100;        // Euler steps for fm_k
  int checkpoint_every = 50;

  TrainConfig train;  // train.seed is ignored; `seed` is used
  InferenceConfig inference;  // consistency and seed follow method / seed

  double toy_noise_std = 0.02;
  double toy_w_upper = 0.5;  // upper-branch weight for x > 0

  double jitter = 0.0075;
  int rollout_episodes = 50;
  int max_steps = 300;

  std::vector<double> fractions;  // sweep-data
  std::vector<Method> sweep_methods = {Method::kImle, Method::kFm1};

  std::vector<double> grid;  // eval-modes conditions
  std::size_t mode_samples = 200;
  double min_fraction = 0.15;

  int bench_runs = 30;

  void Validate() const;  // throws ConfigError
  bool operator==(const RunConfig&) const = default;
};

// Task defaults: toy uses T_o=1, T_p=4, T_a=2 and 4000 epochs; pushlite
// uses T_o=2, T_p=16, T_a=8, hidden {64, 64} and 200 epochs.
RunConfig DefaultConfig(Task task);

// Sections [run] [train] [inference] [toy] [pushlite] [sweep] [eval]
// [bench] of key = value lines. Missing keys keep the task defaults;
// unknown sections or keys and invalid values are errors.
RunConfig ParseConfig(const std::string& text);
std::string SerializeConfig(const RunConfig& cfg);
RunConfig LoadConfigFile(const std::filesystem::path& path);

// 16 hex digits of FNV-1a over the serialized config with seed and out_dir
// cleared, so runs differing only in seed share a hash.
std::string ConfigHash(const RunConfig& cfg);

TrainConfig EffectiveTrainConfig(const RunConfig& cfg);
// imle: m candidates with consistency; imle_no_consistency: m candidates,
// uniform pick; flow methods: one sample per call.
InferenceConfig EffectiveInferenceConfig(const RunConfig& cfg);
int EffectiveFlowSteps(const RunConfig& cfg);

ToyBranchSpec ToySpecFor(const RunConfig& cfg);
DemonstratorOptions DemonstratorOptionsFor(const RunConfig& cfg);

}  // namespace imle
