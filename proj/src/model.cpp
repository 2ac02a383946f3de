#include "mespi/model.hpp"

#include <cmath>

namespace mespi {

double ModelParams::mu() const { return std::exp(mu_log); }

void ParamGrads::init_like(const ModelParams &params) {
  if (w.size() == params.layers.size() && !params.layers.empty() &&
      w.front().size() == params.layers.front().w.size())
    return;  // already sized; keep accumulated values
  w.resize(params.layers.size());
  b.resize(params.layers.size());
  for (size_t i = 0; i < params.layers.size(); ++i) {
    w[i].assign(params.layers[i].w.size(), 0.0);
    b[i].assign(params.layers[i].b.size(), 0.0);
  }
  mu_log = 0;
}

void ParamGrads::clear() {
  for (auto &v : w) std::fill(v.begin(), v.end(), 0.0);
  for (auto &v : b) std::fill(v.begin(), v.end(), 0.0);
  mu_log = 0;
}

ModelParams init_params(const ModelConfig &cfg, uint64_t seed) {
  if (cfg.depth < 1 || cfg.width < 1 || cfg.unrolls < 1 || cfg.df_iterations < 1 ||
      cfg.echoes < 1 || cfg.mu_init <= 0)
    throw std::invalid_argument("init_params: bad config");
  ModelParams params;
  params.config = cfg;
  params.mu_log = std::log(cfg.mu_init);
  CounterRng rng(seed);
  const int io = 2 * cfg.echoes;
  for (int d = 0; d < cfg.depth; ++d) {
    ConvLayer layer;
    layer.in_ch = (d == 0) ? io : cfg.width;
    layer.out_ch = (d == cfg.depth - 1) ? io : cfg.width;
    layer.w.assign(static_cast<size_t>(layer.out_ch) * layer.in_ch * 9, 0.0);
    layer.b.assign(static_cast<size_t>(layer.out_ch), 0.0);
    if (d < cfg.depth - 1) {
      const double s = std::sqrt(1.0 / (9.0 * layer.in_ch));
      for (auto &v : layer.w) v = s * (2.0 * rng.uniform() - 1.0);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

ImageStack regularizer_prox(const ModelParams &params, const ImageStack &x) {
  if (2 * x.echoes != params.layers.front().in_ch)
    throw std::invalid_argument("regularizer_prox: echo/channel mismatch");
  const Grid grid = x.grid;
  RTensor t(2 * x.echoes, grid.rows, grid.cols);
  for (int e = 0; e < x.echoes; ++e) {
    const cplx *v = x.echo(e);
    double *re = t.channel(2 * e);
    double *im = t.channel(2 * e + 1);
    for (int i = 0; i < grid.pixels(); ++i) {
      re[i] = v[i].real();
      im[i] = v[i].imag();
    }
  }
  RTensor cur = t, next;
  for (size_t d = 0; d < params.layers.size(); ++d) {
    conv3x3_forward(cur, params.layers[d], next);
    if (d + 1 < params.layers.size())
      for (auto &v : next.v) v = v > 0 ? v : 0.0;
    std::swap(cur, next);
  }
  ImageStack out(x.echoes, grid);
  for (int e = 0; e < x.echoes; ++e) {
    const double *re = cur.channel(2 * e);
    const double *im = cur.channel(2 * e + 1);
    const double *re0 = t.channel(2 * e);
    const double *im0 = t.channel(2 * e + 1);
    cplx *v = out.echo(e);
    for (int i = 0; i < grid.pixels(); ++i) v[i] = cplx(re[i] + re0[i], im[i] + im0[i]);
  }
  return out;
}

ImageStack unrolled_forward(const ModelParams &params, const ImageStack &gridded_input,
                            const ToeplitzKernel &kernel, const CoilMaps &maps,
                            const ImageStack &rhs_gridded) {
  ImageStack x = gridded_input;
  const double mu = params.mu();
  for (int t = 0; t < params.config.unrolls; ++t) {
    ImageStack z = regularizer_prox(params, x);
    x = df_solve(kernel, maps, rhs_gridded, z, mu, params.config.df_iterations, nullptr,
                 params.config.df_warm_start);
  }
  return x;
}

TrainForward::TrainForward(const ModelParams &params, ParamGrads &grads,
                           const ImageStack &gridded_input, const ToeplitzKernel &theta_kernel,
                           const CoilMaps &maps, const ImageStack &rhs_gridded)
    : params_(params), maps_(maps), grid_(gridded_input.grid) {
  const int E = gridded_input.echoes;
  const int n = grid_.pixels();
  grads.init_like(params);

  Tape::S mu_log = tape_.s_param(params.mu_log, &grads.mu_log);
  Tape::S mu = tape_.s_exp(mu_log);

  std::vector<Tape::C> xs(E), rhs(E);
  for (int e = 0; e < E; ++e) {
    xs[e] = tape_.c_input(std::vector<cplx>(gridded_input.echo(e), gridded_input.echo(e) + n));
    rhs[e] = tape_.c_input(std::vector<cplx>(rhs_gridded.echo(e), rhs_gridded.echo(e) + n));
  }

  for (int t = 0; t < params.config.unrolls; ++t) {
    // regularizer on all echoes jointly
    Tape::R packed = tape_.pack(xs, grid_);
    Tape::R cur = packed;
    for (size_t d = 0; d < params.layers.size(); ++d) {
      cur = tape_.conv3x3(cur, &params.layers[d], &grads.w[d], &grads.b[d]);
      if (d + 1 < params.layers.size()) cur = tape_.relu(cur);
    }
    cur = tape_.r_add(cur, packed);
    std::vector<Tape::C> zs = tape_.unpack(cur, E);

    // per-echo fixed-iteration CG on (T + mu I) x = rhs + mu z
    for (int e = 0; e < E; ++e) {
      Tape::C b = tape_.c_axpy(mu, +1.0, zs[e], rhs[e]);
      Tape::C x = params.config.df_warm_start
                      ? zs[e]
                      : tape_.c_input(std::vector<cplx>(static_cast<size_t>(n), cplx(0)));
      Tape::C q = tape_.c_normal_apply(&theta_kernel, &maps_, mu, x);
      Tape::C r = tape_.c_sub(b, q);
      Tape::C p = r;
      Tape::S rr = tape_.c_dot_re(r, r);
      for (int it = 0; it < params.config.df_iterations; ++it) {
        if (tape_.sval(rr) <= 0) break;
        q = tape_.c_normal_apply(&theta_kernel, &maps_, mu, p);
        Tape::S pq = tape_.c_dot_re(p, q);
        if (tape_.sval(pq) <= 0) break;
        Tape::S alpha = tape_.s_div(rr, pq);
        x = tape_.c_axpy(alpha, +1.0, p, x);
        r = tape_.c_axpy(alpha, -1.0, q, r);
        Tape::S rr_new = tape_.c_dot_re(r, r);
        Tape::S beta = tape_.s_div(rr_new, rr);
        p = tape_.c_axpy(beta, +1.0, p, r);
        rr = rr_new;
      }
      xs[e] = x;
    }
  }
  out_ = xs;
}

ImageStack TrainForward::output() const {
  ImageStack out(static_cast<int>(out_.size()), grid_);
  for (size_t e = 0; e < out_.size(); ++e) {
    const auto &v = tape_.cval(out_[e]);
    std::copy(v.begin(), v.end(), out.echo(static_cast<int>(e)));
  }
  return out;
}

double TrainForward::backward_ssdu(const ToeplitzKernel &lambda_kernel, const ImageStack &target) {
  std::vector<Tape::C> a(out_.size());
  for (size_t e = 0; e < out_.size(); ++e)
    a[e] = tape_.c_toeplitz(&lambda_kernel, &maps_, out_[e]);
  Tape::S loss = tape_.mixed_loss(a, &target);
  tape_.backward(loss);
  return tape_.sval(loss);
}

}  // namespace mespi
