#include "mespi/training.hpp"

#include <cmath>

#include "mespi/acquisition.hpp"

namespace mespi {
namespace {

struct MaskContext {
  ToeplitzKernel theta_kernel, lambda_kernel;
  ImageStack z_theta;   // gridded DF input, also the DF rhs
  ImageStack target;    // gridded held-out image
};

struct SampleContext {
  std::vector<MaskContext> masks;
};

struct AdamState {
  std::vector<std::vector<double>> mw, vw, mb, vb;
  double m_mu = 0, v_mu = 0;
  long step = 0;

  void init_like(const ModelParams &p) {
    mw.resize(p.layers.size());
    vw.resize(p.layers.size());
    mb.resize(p.layers.size());
    vb.resize(p.layers.size());
    for (size_t i = 0; i < p.layers.size(); ++i) {
      mw[i].assign(p.layers[i].w.size(), 0.0);
      vw[i].assign(p.layers[i].w.size(), 0.0);
      mb[i].assign(p.layers[i].b.size(), 0.0);
      vb[i].assign(p.layers[i].b.size(), 0.0);
    }
  }
};

void adam_update(double &p, double g, double &m, double &v, double lr, double bc1, double bc2) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1 - b1) * g;
  v = b2 * v + (1 - b2) * g * g;
  p -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
}

void apply_update(ModelParams &params, const ParamGrads &grads, const TrainConfig &cfg,
                  AdamState &adam) {
  if (cfg.optimizer == Optimizer::kPlainSgd) {
    for (size_t d = 0; d < params.layers.size(); ++d) {
      for (size_t i = 0; i < params.layers[d].w.size(); ++i)
        params.layers[d].w[i] -= cfg.learning_rate * grads.w[d][i];
      for (size_t i = 0; i < params.layers[d].b.size(); ++i)
        params.layers[d].b[i] -= cfg.learning_rate * grads.b[d][i];
    }
    params.mu_log -= cfg.learning_rate * grads.mu_log;
    return;
  }
  ++adam.step;
  const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(adam.step));
  for (size_t d = 0; d < params.layers.size(); ++d) {
    for (size_t i = 0; i < params.layers[d].w.size(); ++i)
      adam_update(params.layers[d].w[i], grads.w[d][i], adam.mw[d][i], adam.vw[d][i],
                  cfg.learning_rate, bc1, bc2);
    for (size_t i = 0; i < params.layers[d].b.size(); ++i)
      adam_update(params.layers[d].b[i], grads.b[d][i], adam.mb[d][i], adam.vb[d][i],
                  cfg.learning_rate, bc1, bc2);
  }
  adam_update(params.mu_log, grads.mu_log, adam.m_mu, adam.v_mu, cfg.learning_rate, bc1, bc2);
}

SampleContext prepare_sample(const TrainSample &sample, const TrainConfig &cfg, uint64_t mask_seed) {
  const Grid grid = sample.maps.grid;
  SsduMaskSet set = make_masks(sample.traj.samples(), cfg.mask_count, cfg.theta_fraction,
                               cfg.center_retained, mask_seed);
  SampleContext ctx;
  for (const auto &pair : set.masks) {
    MaskContext mc;
    const Trajectory theta_traj = subsample_points(sample.traj, pair.theta);
    DcfWeights theta_w = weights_for_subset(sample.traj, pair.theta, grid);
    DcfWeights lambda_w = weights_for_subset(sample.traj, pair.lambda, grid);
    mc.theta_kernel = build_toeplitz_kernel(theta_traj, theta_w, grid);
    mc.lambda_kernel =
        build_toeplitz_kernel(subsample_points(sample.traj, pair.lambda), lambda_w, grid);
    SenseOperator theta_op(std::make_shared<NufftPlan>(grid, theta_traj), sample.maps,
                           std::move(theta_w));
    mc.z_theta = e_adjoint_weighted(theta_op, restrict_kspace(sample.kspace, pair.theta));
    mc.target =
        grid_target(sample.traj, pair.lambda, restrict_kspace(sample.kspace, pair.lambda),
                    sample.maps);
    ctx.masks.push_back(std::move(mc));
  }
  return ctx;
}

}  // namespace

TrainResult train(const std::vector<TrainSample> &dataset, const TrainConfig &cfg,
                  const std::function<void(int, double, const ModelParams &)> &epoch_callback) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.learning_rate < 0 || cfg.theta_fraction <= 0 || cfg.theta_fraction >= 1)
    throw std::invalid_argument("train: bad config");

  std::vector<SampleContext> contexts;
  contexts.reserve(dataset.size());
  for (size_t s = 0; s < dataset.size(); ++s)
    contexts.push_back(prepare_sample(dataset[s], cfg, CounterRng::mix(cfg.seed, s + 1)));

  TrainResult result;
  result.params = init_params(cfg.model, CounterRng::mix(cfg.seed, 0x9a7a));
  AdamState adam;
  adam.init_like(result.params);
  ParamGrads grads;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0;
    long batches = 0;
    for (size_t s = 0; s < dataset.size(); ++s) {
      grads.init_like(result.params);
      grads.clear();
      double sample_loss = 0;
      for (const MaskContext &mc : contexts[s].masks) {
        TrainForward fwd(result.params, grads, mc.z_theta, mc.theta_kernel, dataset[s].maps,
                         mc.z_theta);
        sample_loss += fwd.backward_ssdu(mc.lambda_kernel, mc.target);
      }
      if (!std::isfinite(sample_loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", sample " + std::to_string(s));
      apply_update(result.params, grads, cfg, adam);
      epoch_loss += sample_loss;
      ++batches;
    }
    const double mean_loss = epoch_loss / batches;
    result.epoch_loss.push_back(mean_loss);
    if (epoch_callback) epoch_callback(epoch, mean_loss, result.params);
  }
  return result;
}

ImageStack reconstruct(const ModelParams &params, const MultiEchoKSpace &kspace,
                       const Trajectory &traj, const CoilMaps &maps) {
  const Grid grid = maps.grid;
  DcfWeights w = pipe_menon(traj, grid);
  const ToeplitzKernel kernel = build_toeplitz_kernel(traj, w, grid);
  SenseOperator op(std::make_shared<NufftPlan>(grid, traj), maps, std::move(w));
  const ImageStack z = e_adjoint_weighted(op, kspace);
  return unrolled_forward(params, z, kernel, maps, z);
}

}  // namespace mespi
