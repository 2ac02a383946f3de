#pragma once

#include <memory>

#include "mespi/core.hpp"
#include "mespi/dcf.hpp"
#include "mespi/nufft.hpp"

namespace mespi {

// Multi-coil non-Cartesian encoding operator E (NUFFT of coil-weighted images)
// with optional density compensation used in the weighted adjoint.
struct SenseOperator {
  std::shared_ptr<const NufftPlan> plan;
  CoilMaps maps;
  DcfWeights weights;  // empty => unweighted adjoint

  SenseOperator(std::shared_ptr<const NufftPlan> p, CoilMaps m, DcfWeights w = {});
};

// Frequency-domain kernel of the normal operator E^H W E on the doubled grid.
struct ToeplitzKernel {
  Grid image_grid;            // original image grid
  std::vector<cplx> m;        // (2*rows) x (2*cols), centered frequency domain
};

CoilMaps estimate_coil_maps(const MultiEchoKSpace &baseline, const Trajectory &traj,
                            Grid grid, double calib_radius);

MultiEchoKSpace e_forward(const SenseOperator &op, const ImageStack &x);
ImageStack e_adjoint_weighted(const SenseOperator &op, const MultiEchoKSpace &y);

// Impulse-response construction of the kernel: forward NUFFT of a centered
// double-grid impulse at the subset locations, weighting, adjoint, FFT.
// If exact_dft is set the double-grid transforms use the direct sum (small
// grids only); used by tests to isolate embedding error from NUFFT error.
ToeplitzKernel build_toeplitz_kernel(const Trajectory &traj_subset, const DcfWeights &weights,
                                     Grid grid, bool exact_dft = false);

void toeplitz_apply(const ToeplitzKernel &kernel, const CoilMaps &maps,
                    const cplx *x, cplx *out, Grid grid);  // single echo
ImageStack toeplitz_apply(const ToeplitzKernel &kernel, const CoilMaps &maps, const ImageStack &x);

}  // namespace mespi
