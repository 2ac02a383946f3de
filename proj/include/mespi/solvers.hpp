#pragma once

#include "mespi/operators.hpp"

namespace mespi {

struct CgReport {
  int iterations_run = 0;
  std::vector<double> residual_history;  // per-echo histories concatenated? no: worst-case per iteration
};

// Density-compensated adjoint reconstruction (zero-filled gridding).
ImageStack gridding_recon(const SenseOperator &op, const MultiEchoKSpace &y);

// CG on (E^H W E + lambda I) x = E^H W y via the Toeplitz kernel, per echo.
// lambda < 0 selects the default 1e-3 * mean diagonal of the normal operator.
std::pair<ImageStack, CgReport> cg_sense(const SenseOperator &op, const MultiEchoKSpace &y,
                                         int iterations, double lambda_tikhonov = -1.0);

// Fixed-iteration CG on (T + mu I) x = rhs + mu z, warm-started at z.
// Runs exactly `iterations` steps; updates stop silently once the residual
// is exactly zero so the step count stays fixed.
ImageStack df_solve(const ToeplitzKernel &kernel, const CoilMaps &maps,
                    const ImageStack &rhs_gridded, const ImageStack &z,
                    double mu, int iterations = 15, CgReport *report = nullptr,
                    bool warm_start = true);

}  // namespace mespi
