#pragma once

#include <memory>

#include "mespi/autodiff.hpp"
#include "mespi/solvers.hpp"

namespace mespi {

struct ModelConfig {
  int echoes = 6;
  int depth = 5;          // conv layers in the regularizer
  int width = 32;         // hidden channels
  int unrolls = 10;
  int df_iterations = 15;
  double mu_init = 0.05;
  bool df_warm_start = true;
};

// Regularizer CNN weights (shared across unrolls) plus trainable log(mu).
struct ModelParams {
  ModelConfig config;
  std::vector<ConvLayer> layers;
  double mu_log = 0;

  double mu() const;
};

struct ParamGrads {
  std::vector<std::vector<double>> w, b;
  double mu_log = 0;

  void init_like(const ModelParams &params);
  void clear();
};

// Final layer zero (identity prox at init), hidden layers small uniform.
ModelParams init_params(const ModelConfig &cfg, uint64_t seed);

// Residual CNN on paired real channels, all echoes jointly.
ImageStack regularizer_prox(const ModelParams &params, const ImageStack &x);

// T alternations of prox and fixed-iteration CG data fidelity.
ImageStack unrolled_forward(const ModelParams &params, const ImageStack &gridded_input,
                            const ToeplitzKernel &kernel, const CoilMaps &maps,
                            const ImageStack &rhs_gridded);

// Training-mode forward: records the full graph (prox layers, every CG step,
// and the Lambda-side loss) for exact reverse-mode gradients.
class TrainForward {
public:
  TrainForward(const ModelParams &params, ParamGrads &grads, const ImageStack &gridded_input,
               const ToeplitzKernel &theta_kernel, const CoilMaps &maps,
               const ImageStack &rhs_gridded);

  ImageStack output() const;

  // Appends the SSDU loss node and runs the reverse pass; gradients are
  // accumulated into the ParamGrads given at construction.
  double backward_ssdu(const ToeplitzKernel &lambda_kernel, const ImageStack &target);

private:
  const ModelParams &params_;
  const CoilMaps &maps_;
  Tape tape_;
  std::vector<Tape::C> out_;
  Grid grid_;
};

}  // namespace mespi
