#pragma once

#include "mespi/core.hpp"

namespace mespi {

struct DcfWeights {
  std::vector<double> w;  // per sample, > 0
  bool clamped = false;   // true if a near-zero gridding denominator was clamped
};

// Pipe-Menon iteration w <- w / (G w) where G is kernel spread followed by
// interpolation on the oversampled grid. Weights are scaled so the weighted
// gridded PSF of a centered impulse has unit DC value.
DcfWeights pipe_menon(const Trajectory &traj, Grid grid, int iterations = 30);

// Recomputes Pipe-Menon on exactly the subset locations.
DcfWeights weights_for_subset(const Trajectory &parent, const std::vector<int> &subset_indices,
                              Grid grid, int iterations = 30);

}  // namespace mespi
