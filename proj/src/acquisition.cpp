#include "mespi/acquisition.hpp"

#include <cmath>

#include "mespi/nufft.hpp"

namespace mespi {

Trajectory make_spiral(Grid grid, int arm_count, int samples_per_arm, double turns) {
  if (grid.rows <= 0 || grid.cols <= 0) throw std::invalid_argument("make_spiral: bad grid");
  if (arm_count < 1) throw std::invalid_argument("make_spiral: arm_count must be >= 1");
  if (samples_per_arm < 2) throw std::invalid_argument("make_spiral: samples_per_arm must be >= 2");
  if (turns <= 0) throw std::invalid_argument("make_spiral: turns must be positive");

  const int n = std::min(grid.rows, grid.cols);
  const double rmax = M_PI * (1.0 - 1.0 / n);
  Trajectory traj;
  traj.arm_count = arm_count;
  traj.samples_per_arm = samples_per_arm;
  traj.kx.reserve(static_cast<size_t>(arm_count) * samples_per_arm);
  traj.ky.reserve(static_cast<size_t>(arm_count) * samples_per_arm);
  for (int a = 0; a < arm_count; ++a) {
    const double rot = 2.0 * M_PI * a / arm_count;
    for (int s = 0; s < samples_per_arm; ++s) {
      const double frac = static_cast<double>(s) / (samples_per_arm - 1);
      const double radius = rmax * frac;
      const double angle = 2.0 * M_PI * turns * frac + rot;
      traj.kx.push_back(radius * std::cos(angle));
      traj.ky.push_back(radius * std::sin(angle));
    }
  }
  return traj;
}

Trajectory subsample_arms(const Trajectory &traj, const std::vector<int> &keep) {
  std::vector<bool> seen(static_cast<size_t>(traj.arm_count), false);
  for (int a : keep) {
    if (a < 0 || a >= traj.arm_count) throw std::invalid_argument("subsample_arms: arm index out of range");
    if (seen[a]) throw std::invalid_argument("subsample_arms: duplicate arm index");
    seen[a] = true;
  }
  Trajectory out;
  out.arm_count = static_cast<int>(keep.size());
  out.samples_per_arm = traj.samples_per_arm;
  for (int a : keep) {
    const size_t base = static_cast<size_t>(a) * traj.samples_per_arm;
    for (int s = 0; s < traj.samples_per_arm; ++s) {
      out.kx.push_back(traj.kx[base + s]);
      out.ky.push_back(traj.ky[base + s]);
    }
  }
  return out;
}

Trajectory subsample_points(const Trajectory &traj, const std::vector<int> &indices) {
  if (indices.empty()) throw std::invalid_argument("subsample_points: empty subset");
  Trajectory out;
  out.arm_count = 1;
  out.samples_per_arm = static_cast<int>(indices.size());
  for (int i : indices) {
    if (i < 0 || i >= traj.samples()) throw std::invalid_argument("subsample_points: index out of range");
    out.kx.push_back(traj.kx[i]);
    out.ky.push_back(traj.ky[i]);
  }
  return out;
}

CoilMaps simulate_coils(Grid grid, int coil_count) {
  if (coil_count < 1) throw std::invalid_argument("simulate_coils: coil_count must be >= 1");
  CoilMaps maps(coil_count, grid);
  const double cr = 0.5 * (grid.rows - 1);
  const double cc = 0.5 * (grid.cols - 1);
  const double ring = 0.75 * std::max(grid.rows, grid.cols);
  const double sigma = 0.6 * std::max(grid.rows, grid.cols);
  for (int k = 0; k < coil_count; ++k) {
    const double ang = 2.0 * M_PI * k / coil_count;
    const double pr = cr + ring * std::sin(ang);
    const double pc = cc + ring * std::cos(ang);
    cplx *m = maps.coil(k);
    for (int r = 0; r < grid.rows; ++r)
      for (int c = 0; c < grid.cols; ++c) {
        const double d2 = (r - pr) * (r - pr) + (c - pc) * (c - pc);
        const double mag = std::exp(-0.5 * d2 / (sigma * sigma));
        // gentle spatial phase roll, distinct per coil
        const double ph = 0.1 * ((r - cr) * std::cos(ang) + (c - cc) * std::sin(ang)) *
                          2.0 * M_PI / std::max(grid.rows, grid.cols);
        m[static_cast<size_t>(r) * grid.cols + c] = std::polar(mag, ph);
      }
  }
  // circular FOV support; RSS normalization inside, exact zeros outside
  const double support = 0.48 * std::min(grid.rows, grid.cols);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      const size_t idx = static_cast<size_t>(r) * grid.cols + c;
      const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
      if (d2 > support * support) {
        for (int k = 0; k < coil_count; ++k) maps.coil(k)[idx] = cplx(0);
        continue;
      }
      double rss = 0;
      for (int k = 0; k < coil_count; ++k) rss += std::norm(maps.coil(k)[idx]);
      rss = std::sqrt(rss);
      for (int k = 0; k < coil_count; ++k) maps.coil(k)[idx] /= rss;
    }
  return maps;
}

Phantom make_phantom(Grid grid, uint64_t seed) {
  Phantom ph;
  ph.grid = grid;
  ph.m0.assign(static_cast<size_t>(grid.pixels()), 0.0);
  ph.t2star.assign(static_cast<size_t>(grid.pixels()), 50.0);
  CounterRng rng(seed);
  const double cr = 0.5 * (grid.rows - 1);
  const double cc = 0.5 * (grid.cols - 1);
  const double ar = 0.42 * grid.rows, ac = 0.42 * grid.cols;
  // main ellipse, 4x4 supersampled so edges are partial-volume ramps
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      double cov = 0;
      for (int sr = 0; sr < 4; ++sr)
        for (int sc = 0; sc < 4; ++sc) {
          const double rr = r + (sr + 0.5) / 4.0 - 0.5;
          const double cc2 = c + (sc + 0.5) / 4.0 - 0.5;
          const double e = (rr - cr) * (rr - cr) / (ar * ar) + (cc2 - cc) * (cc2 - cc) / (ac * ac);
          if (e <= 1.0) cov += 1.0 / 16.0;
        }
      if (cov > 0) {
        const size_t idx = static_cast<size_t>(r) * grid.cols + c;
        ph.m0[idx] = cov;
        ph.t2star[idx] = 55.0;
      }
    }
  // a few internal features with varied density and decay
  const int n_feat = 4;
  for (int f = 0; f < n_feat; ++f) {
    const double fr = cr + (rng.uniform() - 0.5) * 0.5 * grid.rows;
    const double fc = cc + (rng.uniform() - 0.5) * 0.5 * grid.cols;
    const double rad = (0.06 + 0.1 * rng.uniform()) * std::min(grid.rows, grid.cols);
    const double dm0 = 0.4 + 0.8 * rng.uniform();
    const double t2 = 25.0 + 50.0 * rng.uniform();
    for (int r = 0; r < grid.rows; ++r)
      for (int c = 0; c < grid.cols; ++c) {
        const size_t idx = static_cast<size_t>(r) * grid.cols + c;
        if (ph.m0[idx] == 0.0) continue;
        double cov = 0;
        for (int sr = 0; sr < 4; ++sr)
          for (int sc = 0; sc < 4; ++sc) {
            const double rr = r + (sr + 0.5) / 4.0 - 0.5;
            const double cc2 = c + (sc + 0.5) / 4.0 - 0.5;
            const double d2 = (rr - fr) * (rr - fr) + (cc2 - fc) * (cc2 - fc);
            if (d2 <= rad * rad) cov += 1.0 / 16.0;
          }
        if (cov > 0) {
          ph.m0[idx] = (1.0 - cov) * ph.m0[idx] + cov * dm0;
          ph.t2star[idx] = (1.0 - cov) * ph.t2star[idx] + cov * t2;
        }
      }
  }
  return ph;
}

ImageStack phantom_echo_images(const Phantom &ph, const EchoSchedule &sched) {
  if (ph.m0.size() != static_cast<size_t>(ph.grid.pixels()) || ph.m0.size() != ph.t2star.size())
    throw std::invalid_argument("phantom_echo_images: inconsistent phantom grids");
  for (size_t i = 1; i < sched.tes.size(); ++i)
    if (sched.tes[i] <= sched.tes[i - 1])
      throw std::invalid_argument("phantom_echo_images: TEs must be strictly increasing");
  ImageStack out(sched.count(), ph.grid);
  for (int e = 0; e < sched.count(); ++e) {
    cplx *img = out.echo(e);
    for (size_t i = 0; i < ph.m0.size(); ++i)
      img[i] = ph.m0[i] * std::exp(-sched.tes[e] / ph.t2star[i]);
  }
  return out;
}

MultiEchoKSpace simulate_kspace(const ImageStack &img, const CoilMaps &maps,
                                const Trajectory &traj, double noise_sd, uint64_t seed) {
  if (maps.grid != img.grid) throw std::invalid_argument("simulate_kspace: grid mismatch");
  NufftPlan plan(img.grid, traj);
  MultiEchoKSpace out(maps.coil_count, img.echoes, traj.samples());
  Image weighted(img.grid);
  for (int c = 0; c < maps.coil_count; ++c) {
    const cplx *s = maps.coil(c);
    for (int e = 0; e < img.echoes; ++e) {
      const cplx *x = img.echo(e);
      for (int i = 0; i < img.grid.pixels(); ++i) weighted.v[i] = s[i] * x[i];
      plan.forward(weighted.v.data(), out.channel(c, e));
    }
  }
  if (noise_sd > 0) {
    CounterRng rng(seed);
    for (auto &s : out.v) s += cplx(noise_sd * rng.normal(), noise_sd * rng.normal());
  }
  return out;
}

}  // namespace mespi
