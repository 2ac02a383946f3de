#include "mespi/dcf.hpp"

#include "mespi/acquisition.hpp"
#include "mespi/nufft.hpp"

namespace mespi {

DcfWeights pipe_menon(const Trajectory &traj, Grid grid, int iterations) {
  if (iterations < 1) throw std::invalid_argument("pipe_menon: iterations must be >= 1");
  if (traj.samples() == 0) throw std::invalid_argument("pipe_menon: empty trajectory");
  NufftPlan plan(grid, traj);
  const int m = traj.samples();
  DcfWeights out;
  out.w.assign(static_cast<size_t>(m), 1.0);
  std::vector<double> gw(static_cast<size_t>(m));
  for (int it = 0; it < iterations; ++it) {
    plan.spread_interp(out.w.data(), gw.data());
    for (int i = 0; i < m; ++i) {
      if (gw[i] < 1e-12) {
        out.clamped = true;
        gw[i] = 1e-12;
      }
      out.w[i] /= gw[i];
    }
  }
  // unit-DC normalization of the weighted gridded PSF
  Image impulse(grid);
  impulse.at(grid.rows / 2, grid.cols / 2) = 1.0;
  std::vector<cplx> s = plan.forward(impulse);
  for (int i = 0; i < m; ++i) s[i] *= out.w[i];
  Image psf = plan.adjoint(s);
  const double dc = psf.at(grid.rows / 2, grid.cols / 2).real();
  if (dc <= 0) throw std::runtime_error("pipe_menon: non-positive PSF DC value");
  for (auto &v : out.w) v /= dc;
  return out;
}

DcfWeights weights_for_subset(const Trajectory &parent, const std::vector<int> &subset_indices,
                              Grid grid, int iterations) {
  if (subset_indices.empty()) throw std::invalid_argument("weights_for_subset: empty subset");
  return pipe_menon(subsample_points(parent, subset_indices), grid, iterations);
}

}  // namespace mespi
