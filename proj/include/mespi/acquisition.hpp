#pragma once

#include "mespi/core.hpp"

namespace mespi {

struct Phantom {
  std::vector<double> m0;       // proton density, arbitrary units
  std::vector<double> t2star;   // ms, strictly positive
  Grid grid;
};

struct EchoSchedule {
  std::vector<double> tes;  // ms, strictly increasing

  static EchoSchedule paper_defaults() {
    return {{3.35, 9.49, 15.63, 21.77, 27.91, 34.05}};
  }
  int count() const { return static_cast<int>(tes.size()); }
};

// Archimedean spiral-out arms; arm i rotated by 2*pi*i/arm_count.
Trajectory make_spiral(Grid grid, int arm_count, int samples_per_arm, double turns);

Trajectory subsample_arms(const Trajectory &traj, const std::vector<int> &keep);

// Restrict a trajectory to an arbitrary ordered subset of sample indices.
Trajectory subsample_points(const Trajectory &traj, const std::vector<int> &indices);

// Gaussian-lobe coils on a ring around the FOV, RSS-normalized on support.
CoilMaps simulate_coils(Grid grid, int coil_count);

// Smooth ellipse phantom with a few internal features; desk-scale stand-in.
Phantom make_phantom(Grid grid, uint64_t seed);

// image_e(r) = m0(r) * exp(-TE_e / t2star(r))
ImageStack phantom_echo_images(const Phantom &ph, const EchoSchedule &sched);

// y_{c,e} = NUFFT(S_c . x_e) + complex Gaussian noise, deterministic in seed.
MultiEchoKSpace simulate_kspace(const ImageStack &img, const CoilMaps &maps,
                                const Trajectory &traj, double noise_sd, uint64_t seed);

}  // namespace mespi
