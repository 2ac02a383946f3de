#pragma once

#include "mespi/acquisition.hpp"

namespace mespi {

// Real magnitude volumes, (time, row, col).
struct TimeSeries {
  int frames = 0;
  Grid grid;
  double tr_seconds = 0;
  std::vector<double> v;

  TimeSeries() = default;
  TimeSeries(int f, Grid g, double tr)
      : frames(f), grid(g), tr_seconds(tr), v(static_cast<size_t>(f) * g.pixels(), 0.0) {}
  double *frame(int t) { return v.data() + static_cast<size_t>(t) * grid.pixels(); }
  const double *frame(int t) const { return v.data() + static_cast<size_t>(t) * grid.pixels(); }
};

// Task regressor plus orthonormalized polynomial drifts (orders 0-2).
struct DesignMatrix {
  int rows = 0;
  std::vector<std::vector<double>> columns;
  std::vector<std::string> labels;
};

struct GlmResult {
  std::vector<std::vector<double>> beta;  // one map per design column
  std::vector<double> t_map;              // t-statistic of the task column
};

// w_e(r) = TE_e * exp(-TE_e / T2*(r)), normalized to sum 1 per pixel.
TimeSeries echo_combine(const std::vector<TimeSeries> &echo_series, const EchoSchedule &sched,
                        const std::vector<double> &t2star_map);

// Double-gamma kernel sampled at TR, normalized to unit peak.
std::vector<double> canonical_hrf(double tr_seconds, double length_seconds = 32.0);

// Rest-first block design: rest, then n_blocks of (on, rest).
DesignMatrix build_design(int n_volumes, double tr, double block_on_seconds,
                          double block_off_seconds, int n_blocks);

// Per-pixel least squares; t = beta_task / (sigma * sqrt([(X^T X)^-1]_task)).
GlmResult glm_fit(const TimeSeries &series, const DesignMatrix &design);

// Log-linear per-pixel T2* fit from multi-echo magnitudes (ln|S| vs TE).
std::vector<double> t2star_fit(const ImageStack &echoes, const EchoSchedule &sched);

}  // namespace mespi
