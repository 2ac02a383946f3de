#pragma once

#include <functional>

#include "mespi/model.hpp"
#include "mespi/ssdu.hpp"

namespace mespi {

enum class Optimizer { kAdaptiveMoments, kPlainSgd };

struct TrainConfig {
  double learning_rate = 5e-4;
  int epochs = 100;
  int mask_count = 7;
  double theta_fraction = 0.6;
  int center_retained = 32;
  uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kAdaptiveMoments;
  ModelConfig model;
};

struct TrainSample {
  MultiEchoKSpace kspace;
  Trajectory traj;
  CoilMaps maps;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;  // mean loss per epoch
};

// Multi-mask SSDU training. Masks, subset weights, Toeplitz kernels and
// gridded inputs are precomputed once per sample and fixed across epochs.
// Batch = one slice: all J mask losses accumulate before each update.
TrainResult train(const std::vector<TrainSample> &dataset, const TrainConfig &cfg,
                  const std::function<void(int epoch, double loss, const ModelParams &)>
                      &epoch_callback = nullptr);

// Inference on all acquired samples: full-Omega gridded input and kernel.
ImageStack reconstruct(const ModelParams &params, const MultiEchoKSpace &kspace,
                       const Trajectory &traj, const CoilMaps &maps);

}  // namespace mespi
