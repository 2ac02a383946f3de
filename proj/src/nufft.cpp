#include "mespi/nufft.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "mespi/fft.hpp"

namespace mespi {
namespace {

constexpr int kTableSize = 1 << 15;

double bessel_i0(double x) {
  // power series; converges fast for the beta range used here
  double sum = 1.0, term = 1.0;
  const double x2 = 0.25 * x * x;
  for (int k = 1; k < 64; ++k) {
    term *= x2 / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

// Continuous Fourier transform of the Kaiser-Bessel kernel
// kb(t) = I0(beta*sqrt(1-(2t/W)^2)) / I0(beta), |t| <= W/2,
// evaluated at frequency f (cycles per grid unit).
double kb_transform(double f, int width, double beta) {
  const double a = M_PI * width * f;
  const double arg = beta * beta - a * a;
  double num;
  if (arg > 0) {
    const double s = std::sqrt(arg);
    num = std::sinh(s) / s;
  } else if (arg < 0) {
    const double s = std::sqrt(-arg);
    num = std::sin(s) / s;
  } else {
    num = 1.0;
  }
  return width * num / bessel_i0(beta);
}

int even_ceil(double x) {
  int n = static_cast<int>(std::ceil(x));
  return (n % 2 == 0) ? n : n + 1;
}

}  // namespace

double NufftPlan::default_beta(int width, double oversampling) {
  const double w = width, os = oversampling;
  return M_PI * std::sqrt(w * w / (os * os) * (os - 0.5) * (os - 0.5) - 0.8);
}

NufftPlan::NufftPlan(Grid grid, const Trajectory &traj, double oversampling, int kernel_width,
                     double kernel_beta)
    : grid_(grid), oversampling_(oversampling), width_(kernel_width), traj_(traj),
      kx_(traj.kx), ky_(traj.ky) {
  if (grid.rows <= 0 || grid.cols <= 0) throw std::invalid_argument("nufft: bad grid");
  if (oversampling < 1.25 || oversampling > 3.0)
    throw std::invalid_argument("nufft: oversampling must be in [1.25, 3]");
  if (kernel_width < 3 || kernel_width > 8)
    throw std::invalid_argument("nufft: kernel width must be in [3, 8]");
  if (kx_.size() != ky_.size()) throw std::invalid_argument("nufft: trajectory size mismatch");
  os_grid_ = {even_ceil(oversampling * grid.rows), even_ceil(oversampling * grid.cols)};
  beta_ = (kernel_beta > 0) ? kernel_beta : default_beta(width_, oversampling_);

  table_.resize(kTableSize + 1);
  const double half = 0.5 * width_;
  const double i0b = bessel_i0(beta_);
  for (int i = 0; i <= kTableSize; ++i) {
    const double t = half * i / kTableSize;
    const double u = 1.0 - (2.0 * t / width_) * (2.0 * t / width_);
    table_[i] = (u >= 0) ? bessel_i0(beta_ * std::sqrt(u)) / i0b : 0.0;
  }
  table_scale_ = kTableSize / half;

  build_neighborhoods();
  scale_r_ = design_axis_scaling(grid_.rows, os_grid_.rows);
  scale_c_ = design_axis_scaling(grid_.cols, os_grid_.cols);
  build_interp_weights();
  build_apodization();
}

double NufftPlan::kernel_at(double dist) const {
  const double a = std::abs(dist) * table_scale_;
  const int i = static_cast<int>(a);
  if (i >= kTableSize) return 0.0;
  const double frac = a - i;
  return table_[i] * (1.0 - frac) + table_[i + 1] * frac;
}

void NufftPlan::build_neighborhoods() {
  nbr_.resize(kx_.size());
  const double half = 0.5 * width_;
  for (size_t m = 0; m < kx_.size(); ++m) {
    // bin coordinates on the oversampled grid, DC at floor(G/2)
    const double tr = ky_[m] * os_grid_.rows / (2.0 * M_PI);
    const double tc = kx_[m] * os_grid_.cols / (2.0 * M_PI);
    Neighborhood &nb = nbr_[m];
    const int r0 = static_cast<int>(std::ceil(tr - half));
    const int c0 = static_cast<int>(std::ceil(tc - half));
    for (int r = r0; r <= static_cast<int>(std::floor(tr + half)); ++r) {
      const double w = kernel_at(tr - r);
      int idx = (r + os_grid_.rows / 2) % os_grid_.rows;
      if (idx < 0) idx += os_grid_.rows;
      nb.row_idx.push_back(idx);
      nb.row_w.push_back(w);
    }
    for (int c = c0; c <= static_cast<int>(std::floor(tc + half)); ++c) {
      const double w = kernel_at(tc - c);
      int idx = (c + os_grid_.cols / 2) % os_grid_.cols;
      if (idx < 0) idx += os_grid_.cols;
      nb.col_idx.push_back(idx);
      nb.col_w.push_back(w);
    }
  }
}

// Per-axis interpolation design. The kernel-table weights above serve the
// density estimation round trip; forward/adjoint gridding instead uses
// least-squares weights fitted against the exact transform for each sample.
// The pre-FFT scaling q is refined by alternating minimization, then pinned
// so that an on-grid DC sample reproduces a constant image exactly.
std::vector<double> NufftPlan::design_axis_scaling(int n, int g) const {
  std::vector<double> q(n);
  for (int i = 0; i < n; ++i)
    q[i] = 1.0 / kb_transform((i - n / 2) / static_cast<double>(g), width_, beta_);

  const double half = 0.5 * width_;
  auto solve_at = [&](double t, std::vector<int> &taps, Eigen::VectorXcd &c) {
    const int k0 = static_cast<int>(std::ceil(t - half));
    const int k1 = static_cast<int>(std::floor(t + half));
    taps.clear();
    for (int k = k0; k <= k1; ++k) taps.push_back(k);
    const int m = static_cast<int>(taps.size());
    Eigen::MatrixXcd a(n, m);
    Eigen::VectorXcd b(n);
    for (int i = 0; i < n; ++i) {
      const double p = 2.0 * M_PI * (i - n / 2) / g;
      for (int j = 0; j < m; ++j) a(i, j) = q[i] * std::polar(1.0, -p * taps[j]);
      b(i) = std::polar(1.0, -p * t);
    }
    c = (a.adjoint() * a).ldlt().solve(a.adjoint() * b);
  };

  constexpr int kTaus = 32;
  std::vector<int> taps;
  Eigen::VectorXcd c;
  for (int iter = 0; iter < 12; ++iter) {
    std::vector<cplx> num(n, cplx(0));
    std::vector<double> den(n, 0.0);
    for (int ti = 0; ti < kTaus; ++ti) {
      const double tau = (ti + 0.5) / kTaus;
      solve_at(tau, taps, c);
      for (int i = 0; i < n; ++i) {
        const double p = 2.0 * M_PI * (i - n / 2) / g;
        cplx h = 0;
        for (size_t j = 0; j < taps.size(); ++j) h += c(j) * std::polar(1.0, -p * taps[j]);
        num[i] += std::conj(h) * std::polar(1.0, -p * tau);
        den[i] += std::norm(h);
      }
    }
    for (int i = 0; i < n; ++i) q[i] = (num[i] / den[i]).real();
  }
  solve_at(0.0, taps, c);
  for (int i = 0; i < n; ++i) {
    const double p = 2.0 * M_PI * (i - n / 2) / g;
    cplx h = 0;
    for (size_t j = 0; j < taps.size(); ++j) h += c(j) * std::polar(1.0, -p * taps[j]);
    q[i] = (1.0 / h).real();
  }
  return q;
}

void NufftPlan::build_interp_weights() {
  auto axis_weights = [this](int n, int g, const std::vector<double> &q, double t,
                             std::vector<cplx> &out, const Eigen::LDLT<Eigen::MatrixXcd> *facw,
                             const Eigen::LDLT<Eigen::MatrixXcd> *facw1) {
    const double half = 0.5 * width_;
    const int k0 = static_cast<int>(std::ceil(t - half));
    const int k1 = static_cast<int>(std::floor(t + half));
    const int m = k1 - k0 + 1;
    Eigen::VectorXcd r(m);
    r.setZero();
    for (int i = 0; i < n; ++i) {
      const double p = 2.0 * M_PI * (i - n / 2) / g;
      cplx w = q[i] * std::polar(1.0, -p * (t - k0));
      const cplx u = std::polar(1.0, p);
      for (int j = 0; j < m; ++j) {
        r(j) += w;
        w *= u;
      }
    }
    const Eigen::VectorXcd c = (m == width_ ? facw : facw1)->solve(r);
    out.resize(m);
    for (int j = 0; j < m; ++j) out[j] = c(j);
  };

  auto lag_fac = [](int n, int g, const std::vector<double> &q, int m) {
    std::vector<cplx> lag(m, cplx(0));
    for (int i = 0; i < n; ++i) {
      const double p = 2.0 * M_PI * (i - n / 2) / g;
      const double q2 = q[i] * q[i];
      for (int d = 0; d < m; ++d) lag[d] += q2 * std::polar(1.0, p * d);
    }
    Eigen::MatrixXcd t(m, m);
    for (int j = 0; j < m; ++j)
      for (int l = 0; l < m; ++l) t(j, l) = (j >= l) ? lag[j - l] : std::conj(lag[l - j]);
    return Eigen::LDLT<Eigen::MatrixXcd>(t);
  };

  const auto frw = lag_fac(grid_.rows, os_grid_.rows, scale_r_, width_);
  const auto frw1 = lag_fac(grid_.rows, os_grid_.rows, scale_r_, width_ + 1);
  const auto fcw = lag_fac(grid_.cols, os_grid_.cols, scale_c_, width_);
  const auto fcw1 = lag_fac(grid_.cols, os_grid_.cols, scale_c_, width_ + 1);

#pragma omp parallel for schedule(static)
  for (long long m = 0; m < static_cast<long long>(kx_.size()); ++m) {
    const double tr = ky_[m] * os_grid_.rows / (2.0 * M_PI);
    const double tc = kx_[m] * os_grid_.cols / (2.0 * M_PI);
    axis_weights(grid_.rows, os_grid_.rows, scale_r_, tr, nbr_[m].row_cw, &frw, &frw1);
    axis_weights(grid_.cols, os_grid_.cols, scale_c_, tc, nbr_[m].col_cw, &fcw, &fcw1);
  }
}

void NufftPlan::build_apodization() {
  apod_.resize(static_cast<size_t>(grid_.pixels()));
  for (int r = 0; r < grid_.rows; ++r)
    for (int c = 0; c < grid_.cols; ++c)
      apod_[static_cast<size_t>(r) * grid_.cols + c] = 1.0 / (scale_r_[r] * scale_c_[c]);
}

void NufftPlan::forward(const cplx *img, cplx *samples) const {
  const int Gr = os_grid_.rows, Gc = os_grid_.cols;
  std::vector<cplx> work(static_cast<size_t>(Gr) * Gc, cplx(0));
  const int roff = Gr / 2 - grid_.rows / 2;
  const int coff = Gc / 2 - grid_.cols / 2;
  for (int r = 0; r < grid_.rows; ++r)
    for (int c = 0; c < grid_.cols; ++c)
      work[static_cast<size_t>(r + roff) * Gc + (c + coff)] =
          img[static_cast<size_t>(r) * grid_.cols + c] /
          apod_[static_cast<size_t>(r) * grid_.cols + c];
  fft2c(work.data(), Gr, Gc);
  for (size_t m = 0; m < kx_.size(); ++m) {
    const Neighborhood &nb = nbr_[m];
    cplx acc = 0;
    for (size_t i = 0; i < nb.row_idx.size(); ++i) {
      const cplx *row = work.data() + static_cast<size_t>(nb.row_idx[i]) * Gc;
      cplx rowacc = 0;
      for (size_t j = 0; j < nb.col_idx.size(); ++j)
        rowacc += nb.col_cw[j] * row[nb.col_idx[j]];
      acc += nb.row_cw[i] * rowacc;
    }
    samples[m] = acc;
  }
}

void NufftPlan::adjoint(const cplx *samples, cplx *img) const {
  const int Gr = os_grid_.rows, Gc = os_grid_.cols;
  std::vector<cplx> work(static_cast<size_t>(Gr) * Gc, cplx(0));
  // sample-major spread, fixed order
  for (size_t m = 0; m < kx_.size(); ++m) {
    const Neighborhood &nb = nbr_[m];
    const cplx s = samples[m];
    for (size_t i = 0; i < nb.row_idx.size(); ++i) {
      cplx *row = work.data() + static_cast<size_t>(nb.row_idx[i]) * Gc;
      const cplx sr = s * std::conj(nb.row_cw[i]);
      for (size_t j = 0; j < nb.col_idx.size(); ++j)
        row[nb.col_idx[j]] += sr * std::conj(nb.col_cw[j]);
    }
  }
  // adjoint of the unnormalized centered FFT = unnormalized inverse
  ifft2c(work.data(), Gr, Gc);
  const double scale = static_cast<double>(Gr) * Gc;
  const int roff = Gr / 2 - grid_.rows / 2;
  const int coff = Gc / 2 - grid_.cols / 2;
  for (int r = 0; r < grid_.rows; ++r)
    for (int c = 0; c < grid_.cols; ++c)
      img[static_cast<size_t>(r) * grid_.cols + c] =
          work[static_cast<size_t>(r + roff) * Gc + (c + coff)] * scale /
          apod_[static_cast<size_t>(r) * grid_.cols + c];
}

std::vector<cplx> NufftPlan::forward(const Image &img) const {
  if (img.grid != grid_) throw std::invalid_argument("nufft forward: grid mismatch");
  std::vector<cplx> out(kx_.size());
  forward(img.v.data(), out.data());
  return out;
}

Image NufftPlan::adjoint(const std::vector<cplx> &samples) const {
  if (samples.size() != kx_.size()) throw std::invalid_argument("nufft adjoint: sample count mismatch");
  Image out(grid_);
  adjoint(samples.data(), out.v.data());
  return out;
}

void NufftPlan::spread_interp(const double *w, double *out) const {
  const int Gr = os_grid_.rows, Gc = os_grid_.cols;
  std::vector<double> work(static_cast<size_t>(Gr) * Gc, 0.0);
  for (size_t m = 0; m < kx_.size(); ++m) {
    const Neighborhood &nb = nbr_[m];
    for (size_t i = 0; i < nb.row_idx.size(); ++i) {
      double *row = work.data() + static_cast<size_t>(nb.row_idx[i]) * Gc;
      const double sr = w[m] * nb.row_w[i];
      for (size_t j = 0; j < nb.col_idx.size(); ++j)
        row[nb.col_idx[j]] += sr * nb.col_w[j];
    }
  }
  for (size_t m = 0; m < kx_.size(); ++m) {
    const Neighborhood &nb = nbr_[m];
    double acc = 0;
    for (size_t i = 0; i < nb.row_idx.size(); ++i) {
      const double *row = work.data() + static_cast<size_t>(nb.row_idx[i]) * Gc;
      double rowacc = 0;
      for (size_t j = 0; j < nb.col_idx.size(); ++j)
        rowacc += nb.col_w[j] * row[nb.col_idx[j]];
      acc += nb.row_w[i] * rowacc;
    }
    out[m] = acc;
  }
}

std::vector<cplx> direct_nudft(const Trajectory &traj, const Image &img) {
  if (img.grid.rows > 64 || img.grid.cols > 64)
    throw std::invalid_argument("direct_nudft: grid larger than 64x64 refused");
  std::vector<cplx> out(traj.kx.size(), cplx(0));
  for (size_t m = 0; m < traj.kx.size(); ++m) {
    cplx acc = 0;
    for (int r = 0; r < img.grid.rows; ++r) {
      const double rc = r - img.grid.rows / 2;
      for (int c = 0; c < img.grid.cols; ++c) {
        const double cc = c - img.grid.cols / 2;
        const double phase = -(traj.kx[m] * cc + traj.ky[m] * rc);
        acc += img.at(r, c) * cplx(std::cos(phase), std::sin(phase));
      }
    }
    out[m] = acc;
  }
  return out;
}

Image direct_nudft_adjoint(const Trajectory &traj, const std::vector<cplx> &samples, Grid grid) {
  if (grid.rows > 64 || grid.cols > 64)
    throw std::invalid_argument("direct_nudft_adjoint: grid larger than 64x64 refused");
  if (samples.size() != traj.kx.size())
    throw std::invalid_argument("direct_nudft_adjoint: sample count mismatch");
  Image out(grid);
  for (int r = 0; r < grid.rows; ++r) {
    const double rc = r - grid.rows / 2;
    for (int c = 0; c < grid.cols; ++c) {
      const double cc = c - grid.cols / 2;
      cplx acc = 0;
      for (size_t m = 0; m < traj.kx.size(); ++m) {
        const double phase = traj.kx[m] * cc + traj.ky[m] * rc;
        acc += samples[m] * cplx(std::cos(phase), std::sin(phase));
      }
      out.at(r, c) = acc;
    }
  }
  return out;
}

}  // namespace mespi
