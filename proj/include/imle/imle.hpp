#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "imle/nn.hpp"
#include "imle/rng.hpp"
#include "imle/tensor.hpp"

namespace imle {

// Observation horizon T_o, prediction horizon T_p, execution horizon T_a.
struct Horizons {
  std::size_t obs = 2;
  std::size_t pred = 16;
  std::size_t exec = 8;

  bool operator==(const Horizons&) const = default;
};

struct LatentVector {
  std::vector<double> values;
};

// One training pair: stacked observation window (flat, T_o * obs_dim) and the
// ground-truth action sequence [T_p, action_dim]. Values are normalized.
struct Demo {
  std::vector<double> observation;
  DenseArray actions;
};

struct TrainConfig {
  std::size_t num_latents = 20;       // m
  double epsilon = 0.03;              // rejection radius
  std::size_t latent_dim = 0;         // 0: T_p * action_dim
  int epochs = 1000;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  Horizons horizons;
  std::vector<std::size_t> hidden = {128, 128};
  AdamConfig adam;

  std::size_t ResolvedLatentDim(const OutputShape& out) const {
    return latent_dim == 0 ? out.width() : latent_dim;
  }
  void Validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct SelectionResult {
  std::vector<std::size_t> valid_indices;
  std::size_t chosen = 0;
  std::vector<double> distances;
  bool fallback_used = false;
};

// L2 norm of the flattened difference.
double EuclideanDistance(const DenseArray& a, const DenseArray& b);
double EuclideanDistance(std::span<const double> a, std::span<const double> b);

std::vector<LatentVector> SampleLatents(Rng& rng, std::size_t m,
                                        std::size_t latent_dim);

// Rejection filter + nearest valid candidate. Valid set is {j : d_j >= eps};
// ties go to the lowest index; an empty valid set falls back to the global
// argmin with fallback_used = true.
SelectionResult SelectCandidate(std::span<const double> distances,
                                double epsilon);

// Called once per candidate forward pass with the concatenated input row.
using ForwardObserver = std::function<void(std::span<const double> input)>;

struct ImleStep {
  double loss = 0.0;
  ParameterSet grads;
  SelectionResult selection;
  std::vector<LatentVector> latents;
};

// Conditional RS-IMLE objective for one demo: draws m fresh latents, generates
// m candidates conditioned on the demo's observation, selects the nearest
// candidate outside the rejection radius, and returns d(A_i, A_j*) with its
// gradient. Selection is treated as a constant.
ImleStep ImleLossAndGrad(const GeneratorNet& net, const Demo& demo,
                         const TrainConfig& cfg, Rng& rng,
                         const ForwardObserver& observer = {});
// Adds the gradient into `accum` instead of returning it (grads left empty).
ImleStep ImleLossAndGrad(const GeneratorNet& net, const Demo& demo,
                         const TrainConfig& cfg, Rng& rng, ParameterSet& accum,
                         const ForwardObserver& observer = {});

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double mean_rejection_fraction = 0.0;
  std::size_t fallback_count = 0;
  double wall_ms = 0.0;
};

struct TrainingReport {
  std::vector<EpochStats> epochs;

  // Columns: epoch,mean_loss,mean_rejection_fraction,fallback_count,wall_ms
  void WriteCsv(std::ostream& os, bool include_wall_time = true) const;
};

struct TrainHooks {
  int checkpoint_every = 0;  // 0 disables
  std::function<void(int epoch, const GeneratorNet& net)> on_checkpoint;
};

struct TrainResult {
  GeneratorNet net;
  TrainingReport report;
};

// Fresh generator for the dataset's shapes, initialized from the kInit stream.
GeneratorNet InitialGenerator(const std::vector<Demo>& dataset,
                              const TrainConfig& cfg);

TrainResult Train(const std::vector<Demo>& dataset, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

// Continue training an existing net.
TrainResult Train(GeneratorNet net, const std::vector<Demo>& dataset,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace imle
