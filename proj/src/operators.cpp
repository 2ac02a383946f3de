#include "mespi/operators.hpp"

#include <cmath>

#include "mespi/fft.hpp"

namespace mespi {

SenseOperator::SenseOperator(std::shared_ptr<const NufftPlan> p, CoilMaps m, DcfWeights w)
    : plan(std::move(p)), maps(std::move(m)), weights(std::move(w)) {
  if (!plan) throw std::invalid_argument("SenseOperator: null plan");
  if (maps.grid != plan->grid()) throw std::invalid_argument("SenseOperator: map/plan grid mismatch");
  if (!weights.w.empty() && static_cast<int>(weights.w.size()) != plan->sample_count())
    throw std::invalid_argument("SenseOperator: weight/sample count mismatch");
}

CoilMaps estimate_coil_maps(const MultiEchoKSpace &baseline, const Trajectory &traj,
                            Grid grid, double calib_radius) {
  if (calib_radius <= 0) throw std::invalid_argument("estimate_coil_maps: calib_radius must be positive");
  if (baseline.samples != traj.samples())
    throw std::invalid_argument("estimate_coil_maps: sample count mismatch");
  NufftPlan plan(grid, traj);
  DcfWeights dcf = pipe_menon(traj, grid);

  // keep density-compensated samples inside the calibration radius, zero the rest
  std::vector<double> taper(static_cast<size_t>(traj.samples()));
  for (int m = 0; m < traj.samples(); ++m) {
    const double kr = std::hypot(traj.kx[m], traj.ky[m]);
    taper[m] = (kr <= calib_radius) ? dcf.w[m] : 0.0;
  }

  const int coils = baseline.coils;
  CoilMaps maps(coils, grid);
  std::vector<cplx> weighted(static_cast<size_t>(traj.samples()));
  std::vector<Image> low(coils, Image(grid));
  for (int c = 0; c < coils; ++c) {
    const cplx *y = baseline.channel(c, 0);  // first echo only
    for (int m = 0; m < traj.samples(); ++m) weighted[m] = taper[m] * y[m];
    plan.adjoint(weighted.data(), low[c].v.data());
  }

  std::vector<double> rss(static_cast<size_t>(grid.pixels()), 0.0);
  double max_rss = 0;
  for (int i = 0; i < grid.pixels(); ++i) {
    double s = 0;
    for (int c = 0; c < coils; ++c) s += std::norm(low[c].v[i]);
    rss[i] = std::sqrt(s);
    max_rss = std::max(max_rss, rss[i]);
  }
  cplx anchor = 0;
  for (int i = 0; i < grid.pixels(); ++i)
    if (rss[i] > 0.05 * max_rss) anchor += low[0].v[i];
  const cplx phase = (std::abs(anchor) > 0) ? std::conj(anchor) / std::abs(anchor) : cplx(1);
  for (int i = 0; i < grid.pixels(); ++i) {
    if (rss[i] > 0.05 * max_rss) {
      for (int c = 0; c < coils; ++c) maps.coil(c)[i] = low[c].v[i] * phase / rss[i];
    }
  }
  return maps;
}

MultiEchoKSpace e_forward(const SenseOperator &op, const ImageStack &x) {
  const Grid grid = op.plan->grid();
  if (x.grid != grid) throw std::invalid_argument("e_forward: grid mismatch");
  const int coils = op.maps.coil_count;
  MultiEchoKSpace y(coils, x.echoes, op.plan->sample_count());
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < coils; ++c)
    for (int e = 0; e < x.echoes; ++e) {
      std::vector<cplx> weighted(static_cast<size_t>(grid.pixels()));
      const cplx *s = op.maps.coil(c);
      const cplx *img = x.echo(e);
      for (int i = 0; i < grid.pixels(); ++i) weighted[i] = s[i] * img[i];
      op.plan->forward(weighted.data(), y.channel(c, e));
    }
  return y;
}

ImageStack e_adjoint_weighted(const SenseOperator &op, const MultiEchoKSpace &y) {
  const Grid grid = op.plan->grid();
  if (y.samples != op.plan->sample_count() || y.coils != op.maps.coil_count)
    throw std::invalid_argument("e_adjoint_weighted: shape mismatch");
  ImageStack x(y.echoes, grid);
#pragma omp parallel for schedule(static)
  for (int e = 0; e < y.echoes; ++e) {
    std::vector<cplx> weighted(static_cast<size_t>(y.samples));
    std::vector<cplx> img(static_cast<size_t>(grid.pixels()));
    cplx *out = x.echo(e);
    for (int c = 0; c < y.coils; ++c) {
      const cplx *yc = y.channel(c, e);
      if (op.weights.w.empty()) {
        std::copy(yc, yc + y.samples, weighted.begin());
      } else {
        for (int m = 0; m < y.samples; ++m) weighted[m] = op.weights.w[m] * yc[m];
      }
      op.plan->adjoint(weighted.data(), img.data());
      const cplx *s = op.maps.coil(c);
      for (int i = 0; i < grid.pixels(); ++i) out[i] += std::conj(s[i]) * img[i];
    }
  }
  return x;
}

ToeplitzKernel build_toeplitz_kernel(const Trajectory &traj_subset, const DcfWeights &weights,
                                     Grid grid, bool exact_dft) {
  if (traj_subset.samples() == 0) throw std::invalid_argument("build_toeplitz_kernel: empty subset");
  if (static_cast<int>(weights.w.size()) != traj_subset.samples())
    throw std::invalid_argument("build_toeplitz_kernel: weight count mismatch");
  const Grid g2{2 * grid.rows, 2 * grid.cols};
  ToeplitzKernel kernel;
  kernel.image_grid = grid;

  // PSF of the weighted subset on the doubled grid, impulse at its center
  std::vector<cplx> weighted(static_cast<size_t>(traj_subset.samples()));
  Image psf(g2);
  if (exact_dft) {
    Image impulse(g2);
    impulse.at(g2.rows / 2, g2.cols / 2) = 1.0;
    std::vector<cplx> s = direct_nudft(traj_subset, impulse);
    for (int m = 0; m < traj_subset.samples(); ++m) weighted[m] = weights.w[m] * s[m];
    psf = direct_nudft_adjoint(traj_subset, weighted, g2);
  } else {
    NufftPlan plan2(g2, traj_subset);
    Image impulse(g2);
    impulse.at(g2.rows / 2, g2.cols / 2) = 1.0;
    std::vector<cplx> s = plan2.forward(impulse);
    for (int m = 0; m < traj_subset.samples(); ++m) weighted[m] = weights.w[m] * s[m];
    plan2.adjoint(weighted.data(), psf.v.data());
  }
  fft2c(psf);
  kernel.m = std::move(psf.v);
  return kernel;
}

void toeplitz_apply(const ToeplitzKernel &kernel, const CoilMaps &maps,
                    const cplx *x, cplx *out, Grid grid) {
  if (kernel.image_grid != grid || maps.grid != grid)
    throw std::invalid_argument("toeplitz_apply: grid mismatch");
  const Grid g2{2 * grid.rows, 2 * grid.cols};
  // The centered transforms would be fftshift(FFT(ifftshift(.))). Instead,
  // write the padded image directly in ifftshifted order, multiply by the
  // ifftshifted kernel, and read the crop back through the same index map.
  // This skips four full circshift passes per coil and gives identical values.
  const int hr = grid.rows / 2, hc = grid.cols / 2;
  std::vector<int> urow(static_cast<size_t>(grid.rows)), ucol(static_cast<size_t>(grid.cols));
  for (int r = 0; r < grid.rows; ++r) urow[r] = (r + g2.rows - hr) % g2.rows;
  for (int q = 0; q < grid.cols; ++q) ucol[q] = (q + g2.cols - hc) % g2.cols;
  std::vector<cplx> mshift(static_cast<size_t>(g2.pixels()));
  for (int r = 0; r < g2.rows; ++r) {
    const int r2 = (r + g2.rows / 2) % g2.rows;
    for (int q = 0; q < g2.cols; ++q)
      mshift[static_cast<size_t>(r) * g2.cols + q] =
          kernel.m[static_cast<size_t>(r2) * g2.cols + (q + g2.cols / 2) % g2.cols];
  }
  std::fill(out, out + grid.pixels(), cplx(0));
  std::vector<cplx> pad(static_cast<size_t>(g2.pixels()));
  for (int c = 0; c < maps.coil_count; ++c) {
    const cplx *s = maps.coil(c);
    std::fill(pad.begin(), pad.end(), cplx(0));
    for (int r = 0; r < grid.rows; ++r)
      for (int q = 0; q < grid.cols; ++q)
        pad[static_cast<size_t>(urow[r]) * g2.cols + ucol[q]] =
            s[static_cast<size_t>(r) * grid.cols + q] * x[static_cast<size_t>(r) * grid.cols + q];
    fft2(pad.data(), g2.rows, g2.cols);
    for (int i = 0; i < g2.pixels(); ++i) pad[i] *= mshift[i];
    ifft2(pad.data(), g2.rows, g2.cols);
    for (int r = 0; r < grid.rows; ++r)
      for (int q = 0; q < grid.cols; ++q)
        out[static_cast<size_t>(r) * grid.cols + q] +=
            std::conj(s[static_cast<size_t>(r) * grid.cols + q]) *
            pad[static_cast<size_t>(urow[r]) * g2.cols + ucol[q]];
  }
}

ImageStack toeplitz_apply(const ToeplitzKernel &kernel, const CoilMaps &maps, const ImageStack &x) {
  ImageStack out(x.echoes, x.grid);
#pragma omp parallel for schedule(static)
  for (int e = 0; e < x.echoes; ++e)
    toeplitz_apply(kernel, maps, x.echo(e), out.echo(e), x.grid);
  return out;
}

}  // namespace mespi
