#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mespi/acquisition.hpp"
#include "mespi/nufft.hpp"
#include "test_common.hpp"

using namespace mespi;

TEST_CASE("spiral arms start at the k-space origin") {
  const Trajectory traj = make_spiral({64, 64}, 10, 200, 8.0);
  CHECK(traj.arm_count == 10);
  CHECK(traj.samples_per_arm == 200);
  CHECK(traj.samples() == 2000);
  for (int a = 0; a < 10; ++a) {
    const int first = a * 200;
    CHECK(std::abs(traj.kx[first]) < 1e-9);
    CHECK(std::abs(traj.ky[first]) < 1e-9);
  }
}

TEST_CASE("ten arms are rotated copies in 36 degree steps") {
  const Trajectory traj = make_spiral({64, 64}, 10, 100, 6.0);
  const double rot = 2.0 * M_PI / 10.0;
  for (int a = 1; a < 10; ++a)
    for (int s = 0; s < 100; ++s) {
      const double c = std::cos(rot * a), sn = std::sin(rot * a);
      const double ex = c * traj.kx[s] - sn * traj.ky[s];
      const double ey = sn * traj.kx[s] + c * traj.ky[s];
      CHECK(std::abs(traj.kx[a * 100 + s] - ex) < 1e-12);
      CHECK(std::abs(traj.ky[a * 100 + s] - ey) < 1e-12);
    }
}

TEST_CASE("spiral radius bounded by pi(1 - 1/rows), exhaustive scan") {
  const Trajectory traj = make_spiral({64, 64}, 4, 500, 8.0);
  const double rmax = M_PI * (1.0 - 1.0 / 64.0);
  double seen = 0;
  for (int i = 0; i < traj.samples(); ++i) {
    const double r = std::hypot(traj.kx[i], traj.ky[i]);
    CHECK(r <= rmax + 1e-12);
    CHECK(std::abs(traj.kx[i]) < M_PI);
    CHECK(std::abs(traj.ky[i]) < M_PI);
    seen = std::max(seen, r);
  }
  CHECK(seen > 0.9 * rmax);  // the spiral actually reaches out
}

TEST_CASE("make_spiral rejects bad arguments") {
  CHECK_THROWS_AS(make_spiral({0, 64}, 1, 10, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(make_spiral({64, 64}, 0, 10, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(make_spiral({64, 64}, 1, 1, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(make_spiral({64, 64}, 1, 10, 0.0), std::invalid_argument);
}

TEST_CASE("subsample_arms keeps the selected arms verbatim") {
  const Trajectory traj = make_spiral({32, 32}, 10, 50, 4.0);
  const Trajectory one = subsample_arms(traj, {0});
  CHECK(one.arm_count == 1);
  CHECK(one.samples_per_arm == 50);
  const Trajectory all = subsample_arms(traj, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(all.kx == traj.kx);
  CHECK(all.ky == traj.ky);

  const Trajectory two = subsample_arms(traj, {0, 5});
  CHECK(two.arm_count == 2);
  for (int s = 0; s < 50; ++s) {
    CHECK(two.kx[s] == traj.kx[s]);
    CHECK(two.kx[50 + s] == traj.kx[5 * 50 + s]);
    CHECK(two.ky[50 + s] == traj.ky[5 * 50 + s]);
  }
  CHECK_THROWS_AS(subsample_arms(traj, {10}), std::invalid_argument);
  CHECK_THROWS_AS(subsample_arms(traj, {0, 0}), std::invalid_argument);
}

TEST_CASE("coil maps are RSS-normalized on support and zero outside") {
  const CoilMaps maps = simulate_coils({48, 48}, 8);
  int on = 0, off = 0;
  for (int p = 0; p < 48 * 48; ++p) {
    double rss = 0;
    for (int c = 0; c < 8; ++c) rss += std::norm(maps.coil(c)[p]);
    if (rss > 0) {
      CHECK(std::abs(rss - 1.0) < 1e-6);
      ++on;
    } else {
      for (int c = 0; c < 8; ++c) CHECK(maps.coil(c)[p] == cplx(0));
      ++off;
    }
  }
  CHECK(on > 0);
  CHECK(off > 0);

  const CoilMaps single = simulate_coils({32, 32}, 1);
  for (int p = 0; p < 32 * 32; ++p)
    if (single.coil(0)[p] != cplx(0))
      CHECK(std::abs(std::abs(single.coil(0)[p]) - 1.0) < 1e-6);
}

TEST_CASE("coil map phase varies smoothly across the support") {
  const CoilMaps maps = simulate_coils({48, 48}, 8);
  for (int c = 0; c < 8; ++c)
    for (int r = 0; r < 48; ++r)
      for (int col = 0; col + 1 < 48; ++col) {
        const cplx a = maps.coil(c)[r * 48 + col];
        const cplx b = maps.coil(c)[r * 48 + col + 1];
        if (a == cplx(0) || b == cplx(0)) continue;
        double d = std::arg(b * std::conj(a));
        CHECK(std::abs(d) < 0.5);  // radians per pixel
      }
}

TEST_CASE("phantom echo images follow mono-exponential decay") {
  Phantom ph;
  ph.grid = {16, 16};
  ph.m0.assign(256, 1.0);
  ph.t2star.assign(256, 50.0);
  const ImageStack one = phantom_echo_images(ph, {{27.91}});
  for (const cplx &v : one.v) {
    CHECK(v.real() == doctest::Approx(std::exp(-27.91 / 50.0)).epsilon(1e-12));
    CHECK(v.imag() == 0.0);
  }
  const ImageStack zero = phantom_echo_images(ph, {{1e-9}});
  for (const cplx &v : zero.v) CHECK(std::abs(v - cplx(1.0)) < 1e-9);
}

TEST_CASE("phantom signal decreases across the echo train everywhere") {
  const Phantom ph = make_phantom({32, 32}, 7);
  const ImageStack s = phantom_echo_images(ph, EchoSchedule::paper_defaults());
  CHECK(s.echoes == 6);
  for (int e = 0; e + 1 < 6; ++e)
    for (int p = 0; p < 32 * 32; ++p)
      CHECK(std::abs(s.echo(e + 1)[p]) <= std::abs(s.echo(e)[p]) + 1e-15);
}

TEST_CASE("phantom maps are physical") {
  const Phantom ph = make_phantom({48, 48}, 3);
  double peak = 0;
  for (int p = 0; p < 48 * 48; ++p) {
    CHECK(ph.m0[p] >= 0.0);
    CHECK(ph.t2star[p] > 0.0);
    peak = std::max(peak, ph.m0[p]);
  }
  CHECK(peak > 0.0);
}

TEST_CASE("simulate_kspace matches the direct oracle without noise") {
  const Grid grid{16, 16};
  const Phantom ph = make_phantom(grid, 11);
  const ImageStack imgs = phantom_echo_images(ph, {{3.35, 15.63}});
  const CoilMaps maps = simulate_coils(grid, 3);
  const Trajectory traj = make_spiral(grid, 2, 40, 3.0);
  const MultiEchoKSpace y = simulate_kspace(imgs, maps, traj, 0.0, 5);
  CHECK(y.coils == 3);
  CHECK(y.echoes == 2);
  CHECK(y.samples == 80);
  for (int c = 0; c < 3; ++c)
    for (int e = 0; e < 2; ++e) {
      Image weighted(grid);
      for (int p = 0; p < grid.pixels(); ++p)
        weighted.v[p] = maps.coil(c)[p] * imgs.echo(e)[p];
      const auto want = direct_nudft(traj, weighted);
      std::vector<cplx> got(y.channel(c, e), y.channel(c, e) + 80);
      CHECK(rel_err(got, want) < 1e-5);
    }
}

TEST_CASE("simulate_kspace is deterministic and zero image gives zero data") {
  const Grid grid{16, 16};
  const ImageStack zero(2, grid);
  const CoilMaps maps = simulate_coils(grid, 2);
  const Trajectory traj = make_spiral(grid, 1, 30, 2.0);
  const MultiEchoKSpace clean = simulate_kspace(zero, maps, traj, 0.0, 9);
  for (const cplx &v : clean.v) CHECK(v == cplx(0));

  const Phantom ph = make_phantom(grid, 2);
  const ImageStack imgs = phantom_echo_images(ph, {{3.35}});
  const MultiEchoKSpace a = simulate_kspace(imgs, maps, traj, 0.02, 123);
  const MultiEchoKSpace b = simulate_kspace(imgs, maps, traj, 0.02, 123);
  CHECK(a.v == b.v);
  const MultiEchoKSpace c = simulate_kspace(imgs, maps, traj, 0.02, 124);
  CHECK(a.v != c.v);
}

TEST_CASE("echo schedule defaults match the acquisition protocol") {
  const EchoSchedule sched = EchoSchedule::paper_defaults();
  const std::vector<double> want = {3.35, 9.49, 15.63, 21.77, 27.91, 34.05};
  CHECK(sched.tes == want);
  for (size_t i = 0; i + 1 < sched.tes.size(); ++i) CHECK(sched.tes[i] < sched.tes[i + 1]);
}
