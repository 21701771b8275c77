#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "imle/config.hpp"
#include "imle/io.hpp"
#include "imle/metrics.hpp"
#include "imle/policy.hpp"

namespace imle {

// Output files live in cfg.out_dir and are named <kind>_<hash>_s<seed>.<ext>.
std::filesystem::path OutputPath(const RunConfig& cfg, const std::string& kind,
                                 const std::string& ext);

struct CommandOptions {
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> fm_checkpoint;  // bench only
};

// Dataset for the config's task, generated in memory.
Dataset BuildDataset(const RunConfig& cfg);

// Nested subset: the first ceil(fraction * n) episodes of a seeded
// permutation (Stream::kSubset), so smaller fractions are prefixes of larger.
std::vector<int> SubsetEpisodes(std::size_t num_episodes, double fraction,
                                std::uint64_t seed);
Dataset SubsetDataset(const Dataset& ds, double fraction, std::uint64_t seed);

struct TrainedPolicy {
  Policy policy;
  TrainingReport report;
};

// Fits the normalizer on `ds`, trains cfg.method, packages the policy.
// on_checkpoint sees each intermediate policy every cfg.checkpoint_every
// epochs.
TrainedPolicy TrainPolicy(
    const RunConfig& cfg, const Dataset& ds,
    const std::function<void(int epoch, const Policy&)>& on_checkpoint = {});

// Success rate of a policy under cfg's inference settings: pushlite rollouts
// or, for the toy task, single-sample success at random conditions.
struct EvalResult {
  double success_rate = 0.0;
  RolloutResult rollouts;            // pushlite
  std::vector<double> toy_x, toy_y;  // toy
};
EvalResult EvaluatePolicy(const RunConfig& cfg, const Policy& policy);

// cfg.mode_samples generated chunks at one grid condition (toy: x;
// pushlite: effector offset of PushLiteProbeState); probe selects the
// Stream::kProbe substream.
std::vector<DenseArray> ModeSamples(const RunConfig& cfg, const Policy& policy,
                                    double condition, std::uint64_t probe);

struct ModeRow {
  double condition = 0.0;
  ModeReport report;
};
// Toy nn_distance: sample means against the two analytic branch values.
// Pushlite nn_distance: chunks against scripted chunks from the probe state.
std::vector<ModeRow> EvalModes(const RunConfig& cfg, const Policy& policy);

struct SweepCell {
  Method method = Method::kImle;
  double fraction = 0.0;
  std::size_t episodes = 0;
  std::size_t windows = 0;
  std::vector<int> checkpoint_epochs;
  std::vector<double> checkpoint_success;
  double final_success = 0.0;
};
struct SweepResult {
  std::vector<SweepCell> cells;
  // Smallest fraction whose final success >= threshold, per method.
  std::optional<double> SmallestFraction(Method method, double threshold) const;
};
SweepResult SweepData(const RunConfig& cfg, const Dataset& full,
                      std::ostream* log = nullptr);

struct BenchRow {
  std::string method;
  LatencyReport report;
};
std::vector<BenchRow> Bench(const RunConfig& cfg, const Policy& imle_policy,
                            const Policy& fm_policy);

// CLI verbs. Each writes its artifacts under cfg.out_dir and returns the
// process exit code; errors propagate as exceptions.
int CmdGenData(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out);
int CmdTrain(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out);
int CmdRollout(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out);
int CmdSweepData(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out);
int CmdEvalModes(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out);
int CmdBench(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out);

// Full command line: verb plus flags. 0 ok, 1 failure, 2 usage/config error.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace imle
