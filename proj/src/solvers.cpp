#include "mespi/solvers.hpp"

#include <cmath>
#include <functional>

namespace mespi {
namespace {

// CG on an SPD system, fixed step count. matvec must be self-adjoint PSD.
void cg_fixed(const std::function<void(const cplx *, cplx *)> &matvec,
              const cplx *rhs, cplx *x, size_t n, int iterations,
              std::vector<double> *history) {
  std::vector<cplx> r(n), p(n), q(n);
  matvec(x, q.data());
  for (size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
  p = r;
  double rr = 0;
  for (size_t i = 0; i < n; ++i) rr += std::norm(r[i]);
  for (int it = 0; it < iterations; ++it) {
    if (rr > 0) {
      matvec(p.data(), q.data());
      double pq = 0;
      for (size_t i = 0; i < n; ++i) pq += (std::conj(p[i]) * q[i]).real();
      if (pq > 0) {
        const double alpha = rr / pq;
        for (size_t i = 0; i < n; ++i) {
          x[i] += alpha * p[i];
          r[i] -= alpha * q[i];
        }
        double rr_new = 0;
        for (size_t i = 0; i < n; ++i) rr_new += std::norm(r[i]);
        const double beta = rr_new / rr;
        for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        rr = rr_new;
      } else {
        rr = 0;
      }
    }
    if (history) history->push_back(std::sqrt(rr));
  }
}

double mean_normal_diagonal(const ToeplitzKernel &kernel, const CoilMaps &maps,
                            const DcfWeights &weights) {
  double wsum = 0;
  for (double w : weights.w) wsum += w;
  double rss = 0;
  for (int c = 0; c < maps.coil_count; ++c)
    for (int i = 0; i < maps.grid.pixels(); ++i) rss += std::norm(maps.coil(c)[i]);
  return wsum * rss / maps.grid.pixels();
}

}  // namespace

ImageStack gridding_recon(const SenseOperator &op, const MultiEchoKSpace &y) {
  return e_adjoint_weighted(op, y);
}

ImageStack df_solve(const ToeplitzKernel &kernel, const CoilMaps &maps,
                    const ImageStack &rhs_gridded, const ImageStack &z,
                    double mu, int iterations, CgReport *report, bool warm_start) {
  if (mu <= 0) throw std::invalid_argument("df_solve: mu must be positive");
  if (iterations < 1) throw std::invalid_argument("df_solve: iterations must be >= 1");
  if (rhs_gridded.grid != z.grid || rhs_gridded.echoes != z.echoes)
    throw std::invalid_argument("df_solve: rhs/z shape mismatch");
  const Grid grid = rhs_gridded.grid;
  const size_t n = static_cast<size_t>(grid.pixels());
  ImageStack x(rhs_gridded.echoes, grid);
  std::vector<std::vector<double>> histories(rhs_gridded.echoes);
#pragma omp parallel for schedule(static)
  for (int e = 0; e < rhs_gridded.echoes; ++e) {
    std::vector<cplx> rhs(n);
    const cplx *b = rhs_gridded.echo(e);
    const cplx *ze = z.echo(e);
    for (size_t i = 0; i < n; ++i) rhs[i] = b[i] + mu * ze[i];
    cplx *xe = x.echo(e);
    if (warm_start) std::copy(ze, ze + n, xe);
    auto matvec = [&](const cplx *in, cplx *out) {
      toeplitz_apply(kernel, maps, in, out, grid);
      for (size_t i = 0; i < n; ++i) out[i] += mu * in[i];
    };
    cg_fixed(matvec, rhs.data(), xe, n, iterations, &histories[e]);
  }
  if (report) {
    report->iterations_run = iterations;
    report->residual_history.assign(iterations, 0.0);
    for (int it = 0; it < iterations; ++it) {
      double s = 0;
      for (const auto &h : histories) s += h[it] * h[it];
      report->residual_history[it] = std::sqrt(s);
    }
  }
  if (!x.v.empty() && !std::isfinite(std::abs(x.v[0])))
    throw std::runtime_error("df_solve: solver diverged (non-finite result)");
  return x;
}

std::pair<ImageStack, CgReport> cg_sense(const SenseOperator &op, const MultiEchoKSpace &y,
                                         int iterations, double lambda_tikhonov) {
  if (iterations < 1) throw std::invalid_argument("cg_sense: iterations must be >= 1");
  if (op.weights.w.empty()) throw std::invalid_argument("cg_sense: operator needs density weights");
  const Grid grid = op.plan->grid();
  const ToeplitzKernel kernel = build_toeplitz_kernel(op.plan->traj(), op.weights, grid);
  ImageStack rhs = e_adjoint_weighted(op, y);
  double lambda = lambda_tikhonov;
  if (lambda < 0) lambda = 1e-3 * mean_normal_diagonal(kernel, op.maps, op.weights);
  const size_t n = static_cast<size_t>(grid.pixels());
  ImageStack x(rhs.echoes, grid);
  std::vector<std::vector<double>> histories(rhs.echoes);
#pragma omp parallel for schedule(static)
  for (int e = 0; e < rhs.echoes; ++e) {
    auto matvec = [&](const cplx *in, cplx *out) {
      toeplitz_apply(kernel, op.maps, in, out, grid);
      for (size_t i = 0; i < n; ++i) out[i] += lambda * in[i];
    };
    cg_fixed(matvec, rhs.echo(e), x.echo(e), n, iterations, &histories[e]);
  }
  CgReport report;
  report.iterations_run = iterations;
  report.residual_history.assign(iterations, 0.0);
  for (int it = 0; it < iterations; ++it) {
    double s = 0;
    for (const auto &h : histories) s += h[it] * h[it];
    report.residual_history[it] = std::sqrt(s);
  }
  for (const cplx &v : x.v)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw std::runtime_error("cg_sense: solver diverged (non-finite result)");
  return {std::move(x), report};
}

}  // namespace mespi
