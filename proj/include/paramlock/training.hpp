#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "paramlock/dataset.hpp"
#include "paramlock/model.hpp"

namespace paramlock {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  float learning_rate = 0.05f;
  std::uint64_t seed = 7;
};

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
  /// Mini-batches whose loss was NaN or infinite.
  int non_finite_batches = 0;
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> epochs;
};

/// Called after every epoch with the current parameters.
using EpochCallback = std::function<void(const EpochMetrics&, const Model&)>;

/// Mini-batch SGD on mean softmax cross-entropy. The shuffle order derives
/// from cfg.seed only, so identical inputs give bit-identical parameters.
/// Non-finite losses are counted, never fatal.
TrainResult train(const Model& initial, const Dataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace paramlock
