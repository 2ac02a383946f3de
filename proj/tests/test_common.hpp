#pragma once

#include <cmath>

#include "mespi/acquisition.hpp"
#include "mespi/core.hpp"

namespace mespi::test {

inline Image random_image(Grid grid, uint64_t seed) {
  CounterRng rng(seed);
  Image img(grid);
  for (auto &v : img.v) v = cplx(rng.normal(), rng.normal());
  return img;
}

inline ImageStack random_stack(int echoes, Grid grid, uint64_t seed) {
  CounterRng rng(seed);
  ImageStack s(echoes, grid);
  for (auto &v : s.v) v = cplx(rng.normal(), rng.normal());
  return s;
}

inline Trajectory random_traj(int samples, uint64_t seed) {
  CounterRng rng(seed);
  Trajectory traj;
  traj.arm_count = 1;
  traj.samples_per_arm = samples;
  for (int i = 0; i < samples; ++i) {
    traj.kx.push_back((rng.uniform() * 2.0 - 1.0) * M_PI * 0.98);
    traj.ky.push_back((rng.uniform() * 2.0 - 1.0) * M_PI * 0.98);
  }
  return traj;
}

inline std::vector<cplx> random_samples(int n, uint64_t seed) {
  CounterRng rng(seed);
  std::vector<cplx> s(static_cast<size_t>(n));
  for (auto &v : s) v = cplx(rng.normal(), rng.normal());
  return s;
}

}  // namespace mespi::test
