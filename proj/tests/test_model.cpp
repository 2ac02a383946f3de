#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mespi/acquisition.hpp"
#include "mespi/model.hpp"
#include "mespi/ssdu.hpp"
#include "test_common.hpp"

using namespace mespi;
using mespi::test::random_stack;
using mespi::test::random_traj;

namespace {

struct ToyProblem {
  Grid grid{16, 16};
  CoilMaps maps;
  ToeplitzKernel theta_kernel, lambda_kernel;
  ImageStack gridded, rhs, target;

  explicit ToyProblem(int echoes, uint64_t seed) {
    maps = simulate_coils(grid, 3);
    CounterRng rng(seed);
    const Trajectory traj = random_traj(80, seed + 1);
    std::vector<int> theta, lambda;
    for (int i = 0; i < 80; ++i) (i % 5 < 3 ? theta : lambda).push_back(i);
    const Trajectory tt = subsample_points(traj, theta);
    const Trajectory tl = subsample_points(traj, lambda);
    DcfWeights wt, wl;
    for (size_t i = 0; i < theta.size(); ++i) wt.w.push_back(0.2 + rng.uniform());
    for (size_t i = 0; i < lambda.size(); ++i) wl.w.push_back(0.2 + rng.uniform());
    theta_kernel = build_toeplitz_kernel(tt, wt, grid);
    lambda_kernel = build_toeplitz_kernel(tl, wl, grid);
    gridded = random_stack(echoes, grid, seed + 2);
    rhs = random_stack(echoes, grid, seed + 3);
    target = random_stack(echoes, grid, seed + 4);
  }
};

ModelConfig toy_config(int echoes) {
  ModelConfig cfg;
  cfg.echoes = echoes;
  cfg.depth = 3;
  cfg.width = 8;
  cfg.unrolls = 2;
  cfg.df_iterations = 5;
  return cfg;
}

// randomize every layer (including the zero-initialized last one) so the
// finite-difference audit sees nonzero gradients everywhere
void randomize_params(ModelParams &params, uint64_t seed) {
  CounterRng rng(seed);
  for (auto &layer : params.layers) {
    const double s = 0.5 * std::sqrt(1.0 / (9.0 * layer.in_ch));
    for (auto &v : layer.w) v = s * (2.0 * rng.uniform() - 1.0);
    for (auto &v : layer.b) v = 0.02 * (2.0 * rng.uniform() - 1.0);
  }
}

double run_loss(const ModelParams &params, const ToyProblem &toy) {
  ParamGrads grads;
  TrainForward fwd(params, grads, toy.gridded, toy.theta_kernel, toy.maps, toy.rhs);
  return fwd.backward_ssdu(toy.lambda_kernel, toy.target);
}

}  // namespace

TEST_CASE("zero conv weights make the regularizer an identity") {
  ModelConfig cfg = toy_config(2);
  ModelParams params = init_params(cfg, 1);
  for (auto &layer : params.layers) {
    std::fill(layer.w.begin(), layer.w.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  }
  const ImageStack x = random_stack(2, {16, 16}, 2);
  const ImageStack y = regularizer_prox(params, x);
  CHECK(x.v == y.v);

  // default init zeroes only the last layer, which is already enough
  const ModelParams fresh = init_params(cfg, 3);
  const ImageStack z = regularizer_prox(fresh, x);
  CHECK(x.v == z.v);
}

TEST_CASE("six-echo shape contract") {
  ModelConfig cfg;  // defaults: 6 echoes, depth 5, width 32
  ModelParams params = init_params(cfg, 4);
  randomize_params(params, 5);
  const ImageStack x = random_stack(6, {64, 64}, 6);
  const ImageStack y = regularizer_prox(params, x);
  CHECK(y.echoes == 6);
  CHECK(y.grid.rows == 64);
  CHECK(y.grid.cols == 64);
  CHECK_THROWS_AS(regularizer_prox(params, random_stack(4, {64, 64}, 7)), std::invalid_argument);
}

TEST_CASE("one unroll with identity prox and huge mu is a no-op") {
  const ToyProblem toy(2, 10);
  ModelConfig cfg = toy_config(2);
  cfg.unrolls = 1;
  cfg.mu_init = 1e9;
  const ModelParams params = init_params(cfg, 11);  // last layer zero: identity prox
  const ImageStack out = unrolled_forward(params, toy.gridded, toy.theta_kernel, toy.maps, toy.rhs);
  CHECK(rel_err(out.v, toy.gridded.v) < 1e-6);
}

TEST_CASE("residual-identity initialization holds through ten unrolls") {
  const ToyProblem toy(2, 12);
  ModelConfig cfg = toy_config(2);
  cfg.unrolls = 10;
  cfg.mu_init = 1e9;
  const ModelParams params = init_params(cfg, 13);
  const ImageStack out = unrolled_forward(params, toy.gridded, toy.theta_kernel, toy.maps, toy.rhs);
  CHECK(rel_err(out.v, toy.gridded.v) < 1e-5);
}

TEST_CASE("training forward reproduces the inference forward") {
  const ToyProblem toy(2, 14);
  ModelParams params = init_params(toy_config(2), 15);
  randomize_params(params, 16);
  ParamGrads grads;
  TrainForward fwd(params, grads, toy.gridded, toy.theta_kernel, toy.maps, toy.rhs);
  const ImageStack a = fwd.output();
  const ImageStack b = unrolled_forward(params, toy.gridded, toy.theta_kernel, toy.maps, toy.rhs);
  CHECK(rel_err(a.v, b.v) < 1e-12);
}

TEST_CASE("forward and backward are bitwise deterministic") {
  const ToyProblem toy(2, 17);
  ModelParams params = init_params(toy_config(2), 18);
  randomize_params(params, 19);
  ParamGrads g1, g2;
  TrainForward f1(params, g1, toy.gridded, toy.theta_kernel, toy.maps, toy.rhs);
  const double l1 = f1.backward_ssdu(toy.lambda_kernel, toy.target);
  TrainForward f2(params, g2, toy.gridded, toy.theta_kernel, toy.maps, toy.rhs);
  const double l2 = f2.backward_ssdu(toy.lambda_kernel, toy.target);
  CHECK(l1 == l2);
  CHECK(g1.mu_log == g2.mu_log);
  for (size_t d = 0; d < g1.w.size(); ++d) {
    CHECK(g1.w[d] == g2.w[d]);
    CHECK(g1.b[d] == g2.b[d]);
  }
}

TEST_CASE("mu gradient matches central finite differences") {
  const ToyProblem toy(2, 20);
  ModelParams params = init_params(toy_config(2), 21);
  randomize_params(params, 22);
  ParamGrads grads;
  TrainForward fwd(params, grads, toy.gridded, toy.theta_kernel, toy.maps, toy.rhs);
  fwd.backward_ssdu(toy.lambda_kernel, toy.target);

  const double h = 1e-5;
  ModelParams plus = params, minus = params;
  plus.mu_log += h;
  minus.mu_log -= h;
  const double fd = (run_loss(plus, toy) - run_loss(minus, toy)) / (2 * h);
  CHECK(std::abs(grads.mu_log - fd) <= 1e-3 * std::max(std::abs(fd), 1e-12));
}

TEST_CASE("conv gradients match central finite differences at 20 probes") {
  const ToyProblem toy(2, 23);
  ModelParams params = init_params(toy_config(2), 24);
  randomize_params(params, 25);
  ParamGrads grads;
  TrainForward fwd(params, grads, toy.gridded, toy.theta_kernel, toy.maps, toy.rhs);
  fwd.backward_ssdu(toy.lambda_kernel, toy.target);

  CounterRng rng(26);
  const double h = 1e-5;
  for (int probe = 0; probe < 20; ++probe) {
    const size_t d = rng.next_u64() % params.layers.size();
    const bool bias = (rng.next_u64() % 8) == 0;
    ModelParams plus = params, minus = params;
    double got;
    if (bias) {
      const size_t i = rng.next_u64() % params.layers[d].b.size();
      plus.layers[d].b[i] += h;
      minus.layers[d].b[i] -= h;
      got = grads.b[d][i];
    } else {
      const size_t i = rng.next_u64() % params.layers[d].w.size();
      plus.layers[d].w[i] += h;
      minus.layers[d].w[i] -= h;
      got = grads.w[d][i];
    }
    const double fd = (run_loss(plus, toy) - run_loss(minus, toy)) / (2 * h);
    CHECK(std::abs(got - fd) <= 1e-3 * std::max(std::abs(fd), 1e-10));
  }
}

TEST_CASE("linear probe gradient is the probe coefficient vector") {
  Tape tape;
  const Grid grid{8, 8};
  const Image coef = mespi::test::random_image(grid, 27);
  const Image x = mespi::test::random_image(grid, 28);
  Tape::C a = tape.c_input(coef.v);
  Tape::C b = tape.c_input(x.v);
  Tape::S probe = tape.c_dot_re(a, b);
  tape.backward(probe);
  CHECK(tape.cgrad(b) == coef.v);
}

TEST_CASE("zero loss seed propagates zero gradients") {
  const ToyProblem toy(2, 29);
  ModelParams params = init_params(toy_config(2), 30);
  randomize_params(params, 31);
  ParamGrads grads;
  TrainForward fwd(params, grads, toy.gridded, toy.theta_kernel, toy.maps, toy.rhs);

  Tape tape;
  Tape::C a = tape.c_input(toy.gridded.v);
  Tape::S s = tape.c_dot_re(a, a);
  tape.backward(s, 0.0);
  for (const cplx &g : tape.cgrad(a)) CHECK(g == cplx(0));
}

TEST_CASE("extra unrolls barely move a converged configuration") {
  // overdetermined sampling so the normal operator is well conditioned and a
  // consistent right-hand side so the fixed point is the generating image
  const Grid grid{16, 16};
  const Trajectory traj = random_traj(400, 32);
  DcfWeights w;
  CounterRng rng(33);
  for (int i = 0; i < 400; ++i) w.w.push_back(0.2 + rng.uniform());
  const ToeplitzKernel kernel = build_toeplitz_kernel(traj, w, grid);
  const CoilMaps maps = simulate_coils(grid, 3);
  const ImageStack truth = random_stack(2, grid, 34);
  const ImageStack rhs = toeplitz_apply(kernel, maps, truth);
  const ImageStack gridded = random_stack(2, grid, 35);

  ModelConfig cfg = toy_config(2);
  cfg.unrolls = 10;
  cfg.df_iterations = 15;
  const ModelParams params = init_params(cfg, 36);  // identity prox
  const ImageStack a = unrolled_forward(params, gridded, kernel, maps, rhs);
  ModelConfig cfg2 = cfg;
  cfg2.unrolls = 20;
  ModelParams params2 = params;
  params2.config = cfg2;
  const ImageStack b = unrolled_forward(params2, gridded, kernel, maps, rhs);
  CHECK(rel_err(b.v, a.v) < 1e-6);
}

TEST_CASE("bad configurations are rejected") {
  ModelConfig cfg;
  cfg.depth = 0;
  CHECK_THROWS_AS(init_params(cfg, 1), std::invalid_argument);
  cfg = ModelConfig{};
  cfg.unrolls = 0;
  CHECK_THROWS_AS(init_params(cfg, 1), std::invalid_argument);
  cfg = ModelConfig{};
  cfg.mu_init = 0.0;
  CHECK_THROWS_AS(init_params(cfg, 1), std::invalid_argument);
}
