#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "mespi/acquisition.hpp"
#include "mespi/solvers.hpp"
#include "mespi/ssdu.hpp"
#include "test_common.hpp"

using namespace mespi;
using mespi::test::random_stack;
using mespi::test::random_traj;

namespace {

void check_partition(const SsduMaskSet &set) {
  for (const auto &pair : set.masks) {
    std::vector<bool> seen(static_cast<size_t>(set.omega_size), false);
    for (int i : pair.theta) {
      REQUIRE(i >= 0);
      REQUIRE(i < set.omega_size);
      REQUIRE(!seen[i]);
      seen[i] = true;
    }
    for (int i : pair.lambda) {
      REQUIRE(i >= 0);
      REQUIRE(i < set.omega_size);
      REQUIRE(!seen[i]);
      seen[i] = true;
    }
    for (bool b : seen) REQUIRE(b);
  }
}

}  // namespace

TEST_CASE("default masks satisfy every invariant") {
  const SsduMaskSet set = make_masks(3000, 7, 0.6, 32, 42);
  CHECK(set.masks.size() == 7);
  check_partition(set);
  for (const auto &pair : set.masks) {
    // the first 32 readout samples stay in theta
    for (int i = 0; i < 32; ++i)
      CHECK(std::find(pair.theta.begin(), pair.theta.end(), i) != pair.theta.end());
    CHECK(std::abs(static_cast<double>(pair.theta.size()) / 3000 - 0.6) <= 1.0 / 3000);
    CHECK(std::abs(static_cast<double>(pair.lambda.size()) / 3000 - 0.4) <= 1.0 / 3000);
  }
}

TEST_CASE("degenerate splits are rejected") {
  CHECK_THROWS_AS(make_masks(100, 7, 1.0, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_masks(100, 0, 0.6, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_masks(100, 7, 0.0, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_masks(100, 7, 0.5, 60, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_masks(1, 7, 0.6, 0, 1), std::invalid_argument);
}

TEST_CASE("seeds control the draw") {
  const SsduMaskSet a = make_masks(1000, 7, 0.6, 32, 5);
  const SsduMaskSet b = make_masks(1000, 7, 0.6, 32, 5);
  for (int j = 0; j < 7; ++j) {
    CHECK(a.masks[j].theta == b.masks[j].theta);
    CHECK(a.masks[j].lambda == b.masks[j].lambda);
  }
  const SsduMaskSet c = make_masks(1000, 7, 0.6, 32, 6);
  for (int j = 0; j < 7; ++j) {
    const std::set<int> la(a.masks[j].lambda.begin(), a.masks[j].lambda.end());
    const std::set<int> lc(c.masks[j].lambda.begin(), c.masks[j].lambda.end());
    std::vector<int> inter;
    std::set_intersection(la.begin(), la.end(), lc.begin(), lc.end(), std::back_inserter(inter));
    const double jaccard =
        static_cast<double>(inter.size()) / (la.size() + lc.size() - inter.size());
    CHECK(jaccard < 0.95);
  }
}

TEST_CASE("partition property holds across random sizes") {
  CounterRng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int omega = 100 + static_cast<int>(rng.next_u64() % 9901);
    const int center = std::min(32, static_cast<int>(0.5 * omega));
    const SsduMaskSet set = make_masks(omega, 3, 0.6, center, 100 + trial);
    check_partition(set);
    for (const auto &pair : set.masks)
      CHECK(std::abs(static_cast<double>(pair.theta.size()) / omega - 0.6) <= 1.0 / omega);
  }
}

TEST_CASE("grid target of zero data is zero") {
  const Grid grid{16, 16};
  const Trajectory traj = random_traj(50, 1);
  const CoilMaps maps = simulate_coils(grid, 3);
  std::vector<int> subset = {0, 5, 10, 15, 20, 25, 30, 35, 40, 45};
  const ImageStack t = grid_target(traj, subset, MultiEchoKSpace(3, 2, 10), maps);
  for (const cplx &v : t.v) CHECK(v == cplx(0));
}

TEST_CASE("identity subset reproduces the gridding reconstruction bitwise") {
  const Grid grid{32, 32};
  const Trajectory traj = make_spiral(grid, 2, 150, 4.0);
  const CoilMaps maps = simulate_coils(grid, 4);
  const Phantom ph = make_phantom(grid, 8);
  const ImageStack imgs = phantom_echo_images(ph, {{3.35, 9.49}});
  const MultiEchoKSpace y = simulate_kspace(imgs, maps, traj, 0.0, 0);
  std::vector<int> all(static_cast<size_t>(traj.samples()));
  for (int i = 0; i < traj.samples(); ++i) all[i] = i;
  const ImageStack a = grid_target(traj, all, restrict_kspace(y, all), maps);
  const SenseOperator op(std::make_shared<NufftPlan>(grid, subsample_points(traj, all)), maps,
                         pipe_menon(traj, grid));
  const ImageStack b = gridding_recon(op, y);
  CHECK(a.v == b.v);
}

TEST_CASE("grid target matches the direct-transform composition") {
  const Grid grid{16, 16};
  const Trajectory traj = random_traj(60, 3);
  const CoilMaps maps = simulate_coils(grid, 3);
  MultiEchoKSpace y(3, 2, 60);
  CounterRng rng(4);
  for (auto &v : y.v) v = cplx(rng.normal(), rng.normal());
  std::vector<int> subset;
  for (int i = 0; i < 60; i += 2) subset.push_back(i);
  const MultiEchoKSpace ys = restrict_kspace(y, subset);
  const ImageStack got = grid_target(traj, subset, ys, maps);

  const Trajectory sub = subsample_points(traj, subset);
  const DcfWeights w = weights_for_subset(traj, subset, grid);
  for (int e = 0; e < 2; ++e) {
    Image want(grid);
    for (int c = 0; c < 3; ++c) {
      std::vector<cplx> wy(subset.size());
      for (size_t m = 0; m < subset.size(); ++m) wy[m] = w.w[m] * ys.channel(c, e)[m];
      const Image img = direct_nudft_adjoint(sub, wy, grid);
      for (int i = 0; i < grid.pixels(); ++i)
        want.v[i] += std::conj(maps.coil(c)[i]) * img.v[i];
    }
    std::vector<cplx> gote(got.echo(e), got.echo(e) + grid.pixels());
    CHECK(rel_err(gote, want.v) < 1e-5);
  }
}

TEST_CASE("loss vanishes when the prediction reproduces the target") {
  const Grid grid{16, 16};
  const Trajectory traj = random_traj(40, 5);
  DcfWeights w;
  CounterRng rng(6);
  for (int i = 0; i < 40; ++i) w.w.push_back(0.2 + rng.uniform());
  const ToeplitzKernel kernel = build_toeplitz_kernel(traj, w, grid);
  const CoilMaps maps = simulate_coils(grid, 2);
  const ImageStack recon = random_stack(2, grid, 7);
  const ImageStack target = toeplitz_apply(kernel, maps, recon);
  CHECK(ssdu_loss(recon, kernel, maps, target) < 1e-12);
}

TEST_CASE("zero prediction against a nonzero target scores exactly two") {
  const Grid grid{16, 16};
  const Trajectory traj = random_traj(40, 8);
  DcfWeights w;
  w.w.assign(40, 1.0);
  const ToeplitzKernel kernel = build_toeplitz_kernel(traj, w, grid);
  const CoilMaps maps = simulate_coils(grid, 2);
  const ImageStack zero(2, grid);
  const ImageStack target = random_stack(2, grid, 9);
  CHECK(ssdu_loss(zero, kernel, maps, target) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("loss agrees with a hand-scripted evaluation") {
  const Grid grid{16, 16};
  const Trajectory traj = random_traj(50, 10);
  DcfWeights w;
  CounterRng rng(11);
  for (int i = 0; i < 50; ++i) w.w.push_back(0.2 + rng.uniform());
  const ToeplitzKernel kernel = build_toeplitz_kernel(traj, w, grid);
  const CoilMaps maps = simulate_coils(grid, 3);
  const ImageStack recon = random_stack(2, grid, 12);
  const ImageStack target = random_stack(2, grid, 13);
  const double got = ssdu_loss(recon, kernel, maps, target);

  const ImageStack a = toeplitz_apply(kernel, maps, recon);
  double d2 = 0, b2 = 0, d1 = 0, b1 = 0;
  for (size_t i = 0; i < target.v.size(); ++i) {
    d2 += std::norm(target.v[i] - a.v[i]);
    b2 += std::norm(target.v[i]);
    d1 += std::abs(target.v[i] - a.v[i]);
    b1 += std::abs(target.v[i]);
  }
  const double want = std::sqrt(d2) / std::sqrt(b2) + d1 / b1;
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("a global phase on data and reconstruction leaves the loss unchanged") {
  const Grid grid{16, 16};
  const Trajectory traj = random_traj(60, 14);
  const CoilMaps maps = simulate_coils(grid, 3);
  MultiEchoKSpace y(3, 1, 60);
  CounterRng rng(15);
  for (auto &v : y.v) v = cplx(rng.normal(), rng.normal());
  std::vector<int> lambda;
  for (int i = 1; i < 60; i += 3) lambda.push_back(i);
  const DcfWeights wl = weights_for_subset(traj, lambda, grid);
  const ToeplitzKernel kernel = build_toeplitz_kernel(subsample_points(traj, lambda), wl, grid);
  const ImageStack recon = random_stack(1, grid, 16);
  const ImageStack target = grid_target(traj, lambda, restrict_kspace(y, lambda), maps);
  const double base = ssdu_loss(recon, kernel, maps, target);

  const cplx phase = std::polar(1.0, 1.234);
  MultiEchoKSpace yp = y;
  for (auto &v : yp.v) v *= phase;
  ImageStack reconp = recon;
  for (auto &v : reconp.v) v *= phase;
  const ImageStack targetp = grid_target(traj, lambda, restrict_kspace(yp, lambda), maps);
  const double rotated = ssdu_loss(reconp, kernel, maps, targetp);
  CHECK(std::abs(base - rotated) <= 1e-10 * base);
}

TEST_CASE("degenerate loss inputs are rejected") {
  const Grid grid{16, 16};
  const Trajectory traj = random_traj(30, 17);
  DcfWeights w;
  w.w.assign(30, 1.0);
  const ToeplitzKernel kernel = build_toeplitz_kernel(traj, w, grid);
  const CoilMaps maps = simulate_coils(grid, 2);
  CHECK_THROWS_AS(ssdu_loss(random_stack(1, grid, 18), kernel, maps, ImageStack(1, grid)),
                  std::domain_error);
  CHECK_THROWS_AS(ssdu_loss(random_stack(1, grid, 19), kernel, maps, random_stack(2, grid, 20)),
                  std::invalid_argument);
  CHECK_THROWS_AS(restrict_kspace(MultiEchoKSpace(2, 1, 30), {}), std::invalid_argument);
  CHECK_THROWS_AS(restrict_kspace(MultiEchoKSpace(2, 1, 30), {30}), std::invalid_argument);
}
