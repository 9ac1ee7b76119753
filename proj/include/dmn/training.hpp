// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dmn/dataset.hpp"
#include "dmn/network.hpp"

namespace dmn {

/// Scaled mean absolute error over the upper Mandel triangle:
/// sum_{i<=j} |pred_ij - target_ij| / sum_{i<=j} |target_ij|.
/// Invariant under joint rescaling of pred and target. Throws Error(data)
/// on a zero target.
double loss(const Stiffness6& pred, const Stiffness6& target);

struct TrainConfig {
  int epochs = 10000;
  int mini_batch_count = 20;
  double learning_rate = 1e-3;
  enum class Optimizer { adam, sgd } optimizer = Optimizer::adam;
  std::uint64_t seed = 0;
  /// Stop once the epoch training error drops to this value; <= 0 disables.
  double stop_at_train_error = -1.0;
  /// Stop when 200 epochs bring relative improvement below 1e-5.
  bool early_stop_plateau = false;
  int threads = 1;

  /// Throws Error(config); needs the training-set size for the batch bound.
  void validate(std::size_t train_size) const;
};

struct EpochRecord {
  int epoch = 0;
  double train_error = 0.0;
  double test_error = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  NetworkStats final_stats;
  double best_test_error = 0.0;
};

/// z ~ U(0.2, 0.8) per leaf, angles ~ U(-pi/4, pi/4); deterministic in seed.
NetworkParams init_random(int layers, const std::vector<Phase>& leaf_phase,
                          std::uint64_t seed);
/// Same with the alternating phase layout.
NetworkParams init_random(int layers, std::uint64_t seed);

/// Deep copy of a pretrained model as the starting point for a new fit.
/// Throws Error(config) when the layer counts differ: parameters of one
/// topology say nothing about another.
NetworkParams transfer_init(const NetworkParams& pretrained, int target_layers);

/// Mean loss over a sample list with the given parameters.
double dataset_error(const NetworkParams& p, const std::vector<Sample>& samples,
                     int threads = 1);

/// Mean loss and its gradient over train[indices]. Per-sample work may run in
/// parallel; accumulation is fixed-order so results are bitwise reproducible
/// at any thread count. Throws Error(solver) on a non-finite loss naming the
/// sample.
struct BatchGradient {
  double loss = 0.0;
  NetworkGradients grad;
};
BatchGradient batch_gradient(const NetworkParams& p,
                             const std::vector<Sample>& samples,
                             const std::vector<int>& indices, int threads = 1);

/// Mini-batch stochastic gradient training. Batches are reshuffled every
/// epoch from the config seed; the epoch training error is the mean of the
/// (pre-update) batch losses. Returns the parameters that scored the best
/// test error, with the full per-epoch history.
std::pair<NetworkParams, TrainHistory> train(const NetworkParams& p0,
                                             const Dataset& data,
                                             const TrainConfig& cfg);

/// History CSV: epoch, train_error, test_error, seconds.
void save_history(const TrainHistory& h, const std::string& path);

}  // namespace dmn
