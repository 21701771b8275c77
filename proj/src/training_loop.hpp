#pragma once

// Shared epoch/batch driver for the IMLE and flow-matching trainers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "imle/errors.hpp"
#include "imle/imle.hpp"

namespace imle::detail {

struct DemoStep {
  double loss = 0.0;
  double rejection_fraction = 0.0;
  bool fallback = false;
};

inline void ValidateDataset(const std::vector<Demo>& dataset) {
  if (dataset.empty()) throw PreconditionError("training dataset is empty");
  const auto& first = dataset.front();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].observation.size() != first.observation.size() ||
        dataset[i].actions.shape() != first.actions.shape()) {
      throw DimensionError("demo " + std::to_string(i) +
                           " shape differs from demo 0");
    }
  }
  if (first.actions.rank() != 2) {
    throw DimensionError("demo actions must be [T_p, action_dim]");
  }
}

// step(demo, rng, grad_accumulator) -> DemoStep; the step adds the demo's
// gradient into the accumulator.
template <class StepFn>
TrainingReport RunTrainingLoop(GeneratorNet& net,
                               const std::vector<Demo>& dataset,
                               const TrainConfig& cfg, const TrainHooks& hooks,
                               StepFn&& step) {
  TrainingReport report;
  AdamState adam(net, cfg.adam);
  ParameterSet batch_grad = ParameterSet::ZerosLike(net.params());
  std::vector<std::size_t> order(dataset.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::ForStream(cfg.seed, Stream::kShuffle,
                                     static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    EpochStats stats;
    stats.epoch = epoch;
    double loss_sum = 0.0;
    double reject_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch_grad.SetZero();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        Rng rng = Rng::ForStream(cfg.seed, Stream::kLatents,
                                 static_cast<std::uint64_t>(epoch), idx);
        const DemoStep s = step(dataset[idx], rng, batch_grad);
        if (!std::isfinite(s.loss)) {
          throw NumericError("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch) + ", demo " +
                             std::to_string(idx));
        }
        loss_sum += s.loss;
        reject_sum += s.rejection_fraction;
        if (s.fallback) ++stats.fallback_count;
      }
      batch_grad.Scale(1.0 / static_cast<double>(end - start));
      AdamStep(net, batch_grad, adam);
    }
    const double n = static_cast<double>(dataset.size());
    stats.mean_loss = loss_sum / n;
    stats.mean_rejection_fraction = reject_sum / n;
    stats.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    report.epochs.push_back(stats);

    if (hooks.checkpoint_every > 0 && hooks.on_checkpoint &&
        (epoch + 1) % hooks.checkpoint_every == 0) {
      hooks.on_checkpoint(epoch + 1, net);
    }
  }
  return report;
}

}  // namespace imle::detail
