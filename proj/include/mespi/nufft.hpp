#pragma once

#include "mespi/core.hpp"

namespace mespi {

// Oversampled Kaiser-Bessel gridding NUFFT.
//
// Conventions: pixel coordinates are centered (DC at pixel floor(N/2));
// k-space locations are in rad/pixel in [-pi, pi).
//   forward:  s_m = sum_r x(r) exp(-i k_m . r)
//   adjoint:  x(r) = sum_m s_m exp(+i k_m . r)
class NufftPlan {
public:
  NufftPlan(Grid grid, const Trajectory &traj, double oversampling = 2.0,
            int kernel_width = 6, double kernel_beta = 0.0);  // 0 => default_beta

  void forward(const cplx *img, cplx *samples) const;
  void adjoint(const cplx *samples, cplx *img) const;

  std::vector<cplx> forward(const Image &img) const;
  Image adjoint(const std::vector<cplx> &samples) const;

  // Gridding round trip without deapodization: spread sample weights onto
  // the oversampled grid, then interpolate back at the sample locations.
  // This is the G operator of Pipe-Menon density estimation.
  void spread_interp(const double *w, double *out) const;

  Grid grid() const { return grid_; }
  const Trajectory &traj() const { return traj_; }
  Grid oversampled_grid() const { return os_grid_; }
  int sample_count() const { return static_cast<int>(kx_.size()); }
  double oversampling() const { return oversampling_; }
  int kernel_width() const { return width_; }
  double kernel_beta() const { return beta_; }
  const std::vector<double> &apodization() const { return apod_; }

  static double default_beta(int width, double oversampling);

private:
  struct Neighborhood {
    std::vector<int> row_idx, col_idx;      // wrapped oversampled-grid indices
    std::vector<double> row_w, col_w;       // kernel weights per axis
    std::vector<cplx> row_cw, col_cw;       // least-squares interpolation weights
  };

  double kernel_at(double dist) const;  // table lookup, |dist| <= width/2
  void build_neighborhoods();
  std::vector<double> design_axis_scaling(int n, int g) const;
  void build_interp_weights();
  void build_apodization();

  Grid grid_;
  Grid os_grid_;
  double oversampling_;
  int width_;
  double beta_;
  Trajectory traj_;
  std::vector<double> kx_, ky_;
  std::vector<double> table_;    // kernel samples over [0, width/2]
  double table_scale_ = 0;
  std::vector<Neighborhood> nbr_;
  std::vector<double> scale_r_, scale_c_;  // per-axis pre-FFT scaling
  std::vector<double> apod_;     // deapodization map on the image grid
};

// Exact O(N*M) sums, for verification only; grids above 64x64 are refused.
std::vector<cplx> direct_nudft(const Trajectory &traj, const Image &img);
Image direct_nudft_adjoint(const Trajectory &traj, const std::vector<cplx> &samples, Grid grid);

}  // namespace mespi
