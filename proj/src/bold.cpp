#include "mespi/bold.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace mespi {

TimeSeries echo_combine(const std::vector<TimeSeries> &echo_series, const EchoSchedule &sched,
                        const std::vector<double> &t2star_map) {
  if (echo_series.size() != static_cast<size_t>(sched.count()))
    throw std::invalid_argument("echo_combine: echo count mismatch");
  const TimeSeries &first = echo_series.front();
  for (const auto &s : echo_series)
    if (s.frames != first.frames || !(s.grid == first.grid))
      throw std::invalid_argument("echo_combine: series shape mismatch");
  if (t2star_map.size() != static_cast<size_t>(first.grid.pixels()))
    throw std::invalid_argument("echo_combine: t2star map size mismatch");

  const int n = first.grid.pixels();
  const int ne = sched.count();
  std::vector<double> weights(static_cast<size_t>(ne) * n);
  for (int i = 0; i < n; ++i) {
    const double t2 = t2star_map[i];
    if (t2 <= 0) throw std::invalid_argument("echo_combine: non-positive t2star");
    double sum = 0;
    for (int e = 0; e < ne; ++e) {
      const double w = sched.tes[e] * std::exp(-sched.tes[e] / t2);
      weights[static_cast<size_t>(e) * n + i] = w;
      sum += w;
    }
    for (int e = 0; e < ne; ++e) weights[static_cast<size_t>(e) * n + i] /= sum;
  }

  TimeSeries out(first.frames, first.grid, first.tr_seconds);
  for (int t = 0; t < first.frames; ++t) {
    double *dst = out.frame(t);
    for (int e = 0; e < ne; ++e) {
      const double *src = echo_series[e].frame(t);
      const double *w = weights.data() + static_cast<size_t>(e) * n;
      for (int i = 0; i < n; ++i) dst[i] += w[i] * src[i];
    }
  }
  return out;
}

std::vector<double> canonical_hrf(double tr_seconds, double length_seconds) {
  if (tr_seconds <= 0) throw std::invalid_argument("canonical_hrf: tr must be positive");
  auto gamma_pdf = [](double t, double shape, double scale) {
    if (t <= 0) return 0.0;
    return std::pow(t / scale, shape - 1.0) * std::exp(-t / scale) /
           (scale * std::tgamma(shape));
  };
  const int len = static_cast<int>(std::floor(length_seconds / tr_seconds)) + 1;
  std::vector<double> h(static_cast<size_t>(len));
  double peak = 0;
  for (int i = 0; i < len; ++i) {
    const double t = i * tr_seconds;
    h[i] = gamma_pdf(t, 6.0, 1.0) - gamma_pdf(t, 16.0, 1.0) / 6.0;
    peak = std::max(peak, h[i]);
  }
  if (peak > 0)
    for (auto &v : h) v /= peak;
  return h;
}

DesignMatrix build_design(int n_volumes, double tr, double block_on_seconds,
                          double block_off_seconds, int n_blocks) {
  if (n_volumes < 4 || tr <= 0) throw std::invalid_argument("build_design: bad series shape");
  if (n_blocks < 1) throw std::invalid_argument("build_design: need at least one task block");
  const double total_task = block_off_seconds + n_blocks * (block_on_seconds + block_off_seconds);
  if (total_task > n_volumes * tr + 1e-9)
    throw std::invalid_argument("build_design: task paradigm longer than the series");

  // rest-first boxcar
  std::vector<double> boxcar(static_cast<size_t>(n_volumes), 0.0);
  for (int t = 0; t < n_volumes; ++t) {
    const double sec = t * tr;
    for (int b = 0; b < n_blocks; ++b) {
      const double on = block_off_seconds + b * (block_on_seconds + block_off_seconds);
      if (sec >= on && sec < on + block_on_seconds) boxcar[t] = 1.0;
    }
  }
  const std::vector<double> hrf = canonical_hrf(tr);
  std::vector<double> task(static_cast<size_t>(n_volumes), 0.0);
  for (int t = 0; t < n_volumes; ++t)
    for (int k = 0; k <= t && k < static_cast<int>(hrf.size()); ++k)
      task[t] += hrf[k] * boxcar[t - k];

  DesignMatrix design;
  design.rows = n_volumes;
  design.columns.push_back(task);
  design.labels.push_back("task");
  // polynomial drifts, Gram-Schmidt orthonormalized
  std::vector<std::vector<double>> drifts;
  for (int order = 0; order <= 2; ++order) {
    std::vector<double> col(static_cast<size_t>(n_volumes));
    for (int t = 0; t < n_volumes; ++t) {
      const double x = 2.0 * t / (n_volumes - 1) - 1.0;
      col[t] = std::pow(x, order);
    }
    for (const auto &prev : drifts) {
      double d = 0;
      for (int t = 0; t < n_volumes; ++t) d += prev[t] * col[t];
      for (int t = 0; t < n_volumes; ++t) col[t] -= d * prev[t];
    }
    double nrm = 0;
    for (double v : col) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm < 1e-12) throw std::invalid_argument("build_design: degenerate drift column");
    for (auto &v : col) v /= nrm;
    drifts.push_back(col);
  }
  for (int order = 0; order <= 2; ++order) {
    design.columns.push_back(drifts[order]);
    design.labels.push_back("drift" + std::to_string(order));
  }
  // task column must not be absorbed by the drifts
  double tnorm = 0;
  for (double v : task) tnorm += v * v;
  if (tnorm < 1e-12) throw std::invalid_argument("build_design: task column is zero");
  return design;
}

GlmResult glm_fit(const TimeSeries &series, const DesignMatrix &design) {
  const int n = design.rows;
  const int p = static_cast<int>(design.columns.size());
  if (series.frames != n) throw std::invalid_argument("glm_fit: design rows != series length");
  Eigen::MatrixXd X(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = design.columns[j][i];

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    const int bad = qr.colsPermutation().indices()(p - 1);
    throw std::invalid_argument("glm_fit: rank-deficient design, column '" +
                                design.labels[bad] + "'");
  }
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
  const Eigen::MatrixXd pinv = xtx_inv * X.transpose();
  const double c_task = xtx_inv(0, 0);

  const int npix = series.grid.pixels();
  GlmResult result;
  result.beta.assign(p, std::vector<double>(static_cast<size_t>(npix), 0.0));
  result.t_map.assign(static_cast<size_t>(npix), 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < npix; ++i) {
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) y(t) = series.frame(t)[i];
    const Eigen::VectorXd beta = pinv * y;
    const Eigen::VectorXd resid = y - X * beta;
    const double sigma2 = resid.squaredNorm() / (n - p);
    for (int j = 0; j < p; ++j) result.beta[j][i] = beta(j);
    const double denom = std::sqrt(sigma2 * c_task);
    result.t_map[i] = denom > 0 ? beta(0) / denom : (beta(0) == 0 ? 0.0 : 1e12);
  }
  return result;
}

std::vector<double> t2star_fit(const ImageStack &echoes, const EchoSchedule &sched) {
  if (echoes.echoes != sched.count()) throw std::invalid_argument("t2star_fit: echo count mismatch");
  const int n = echoes.grid.pixels();
  const int ne = sched.count();
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  double te_mean = 0;
  for (double te : sched.tes) te_mean += te;
  te_mean /= ne;
  for (int i = 0; i < n; ++i) {
    // least squares slope of ln|S| vs TE
    double sy = 0, sxy = 0, sxx = 0;
    bool valid = true;
    for (int e = 0; e < ne; ++e) {
      const double mag = std::abs(echoes.echo(e)[i]);
      if (mag <= 1e-12) {
        valid = false;
        break;
      }
      const double x = sched.tes[e] - te_mean;
      const double y = std::log(mag);
      sy += y;
      sxy += x * y;
      sxx += x * x;
    }
    if (!valid) {
      out[i] = 1.0;  // background: short positive placeholder
      continue;
    }
    const double slope = sxy / sxx;
    out[i] = (slope < -1e-9) ? -1.0 / slope : 1e6;
  }
  return out;
}

}  // namespace mespi
