#include "mespi/ssdu.hpp"

#include <algorithm>
#include <cmath>

#include "mespi/acquisition.hpp"

namespace mespi {

SsduMaskSet make_masks(int omega_size, int j_count, double theta_fraction,
                       int center_retained, uint64_t seed) {
  if (omega_size < 2) throw std::invalid_argument("make_masks: omega too small");
  if (j_count < 1) throw std::invalid_argument("make_masks: j_count must be >= 1");
  if (theta_fraction <= 0 || theta_fraction > 1)
    throw std::invalid_argument("make_masks: theta_fraction must be in (0, 1]");
  if (center_retained < 0 || center_retained > theta_fraction * omega_size)
    throw std::invalid_argument("make_masks: center_retained exceeds theta budget");
  const int theta_count = static_cast<int>(std::lround(theta_fraction * omega_size));
  if (theta_count >= omega_size)
    throw std::invalid_argument("make_masks: split leaves lambda empty");
  if (theta_count < center_retained)
    throw std::invalid_argument("make_masks: theta smaller than retained center");

  SsduMaskSet set;
  set.omega_size = omega_size;
  set.center_retained = center_retained;
  set.theta_fraction = theta_fraction;
  CounterRng rng(seed);
  std::vector<int> pool(static_cast<size_t>(omega_size - center_retained));
  for (int j = 0; j < j_count; ++j) {
    for (size_t i = 0; i < pool.size(); ++i) pool[i] = center_retained + static_cast<int>(i);
    rng.shuffle(pool);
    SsduMaskSet::Pair pair;
    pair.theta.assign(pool.begin(), pool.begin() + (theta_count - center_retained));
    for (int i = 0; i < center_retained; ++i) pair.theta.push_back(i);
    pair.lambda.assign(pool.begin() + (theta_count - center_retained), pool.end());
    std::sort(pair.theta.begin(), pair.theta.end());
    std::sort(pair.lambda.begin(), pair.lambda.end());
    set.masks.push_back(std::move(pair));
  }
  return set;
}

MultiEchoKSpace restrict_kspace(const MultiEchoKSpace &y, const std::vector<int> &indices) {
  if (indices.empty()) throw std::invalid_argument("restrict_kspace: empty subset");
  MultiEchoKSpace out(y.coils, y.echoes, static_cast<int>(indices.size()));
  for (int c = 0; c < y.coils; ++c)
    for (int e = 0; e < y.echoes; ++e) {
      const cplx *src = y.channel(c, e);
      cplx *dst = out.channel(c, e);
      for (size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= y.samples)
          throw std::invalid_argument("restrict_kspace: index out of range");
        dst[i] = src[indices[i]];
      }
    }
  return out;
}

ImageStack grid_target(const Trajectory &parent, const std::vector<int> &subset_indices,
                       const MultiEchoKSpace &y_subset, const CoilMaps &maps) {
  if (subset_indices.empty()) throw std::invalid_argument("grid_target: empty subset");
  if (y_subset.samples != static_cast<int>(subset_indices.size()))
    throw std::invalid_argument("grid_target: sample count mismatch");
  const Trajectory sub = subsample_points(parent, subset_indices);
  DcfWeights w = weights_for_subset(parent, subset_indices, maps.grid);
  SenseOperator op(std::make_shared<NufftPlan>(maps.grid, sub), maps, std::move(w));
  return e_adjoint_weighted(op, y_subset);
}

double ssdu_loss(const ImageStack &recon, const ToeplitzKernel &lambda_kernel,
                 const CoilMaps &maps, const ImageStack &target) {
  if (recon.grid != target.grid || recon.echoes != target.echoes)
    throw std::invalid_argument("ssdu_loss: shape mismatch");
  const ImageStack a = toeplitz_apply(lambda_kernel, maps, recon);
  const double b2 = norm2(target.v);
  const double b1 = norm1(target.v.data(), target.v.size());
  if (b2 == 0 || b1 == 0) throw std::domain_error("ssdu_loss: zero target, loss undefined");
  std::vector<cplx> diff(target.v.size());
  for (size_t i = 0; i < diff.size(); ++i) diff[i] = target.v[i] - a.v[i];
  return norm2(diff) / b2 + norm1(diff.data(), diff.size()) / b1;
}

}  // namespace mespi
