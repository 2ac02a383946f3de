#pragma once

#include "mespi/operators.hpp"

namespace mespi {

// J disjoint-pair splits of the acquired sample index set Omega.
struct SsduMaskSet {
  int omega_size = 0;
  int center_retained = 0;
  double theta_fraction = 0;
  struct Pair {
    std::vector<int> theta;   // data-fidelity indices, ascending
    std::vector<int> lambda;  // loss indices, ascending
  };
  std::vector<Pair> masks;
};

// Each mask: center block in theta, remaining indices split uniformly at
// random without replacement to hit theta_fraction. Deterministic in seed.
SsduMaskSet make_masks(int omega_size, int j_count, double theta_fraction,
                       int center_retained, uint64_t seed);

// Coil-combined density-compensated gridded image of a sample subset:
// per echo sum_c conj(S_c) NUFFT^H(W_subset . y_subset).
// y_subset holds only the subset's samples, in subset index order.
ImageStack grid_target(const Trajectory &parent, const std::vector<int> &subset_indices,
                       const MultiEchoKSpace &y_subset, const CoilMaps &maps);

// Restrict full-Omega k-space to a subset of sample indices.
MultiEchoKSpace restrict_kspace(const MultiEchoKSpace &y, const std::vector<int> &indices);

// Mixed l1-l2 loss between the Lambda-side normal-operator image of the
// reconstruction and the gridded held-out target, all echoes jointly:
//   |b-a|_2/|b|_2 + |b-a|_1/|b|_1
double ssdu_loss(const ImageStack &recon, const ToeplitzKernel &lambda_kernel,
                 const CoilMaps &maps, const ImageStack &target);

}  // namespace mespi
