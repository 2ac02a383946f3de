#include "mespi/autodiff.hpp"

#include <cmath>

namespace mespi {

void conv3x3_forward(const RTensor &in, const ConvLayer &layer, RTensor &out) {
  const int rows = in.rows, cols = in.cols;
  out = RTensor(layer.out_ch, rows, cols);
#pragma omp parallel for schedule(static)
  for (int o = 0; o < layer.out_ch; ++o) {
    double *op = out.channel(o);
    const double bias = layer.b[o];
    for (int i = 0; i < rows * cols; ++i) op[i] = bias;
    for (int ic = 0; ic < layer.in_ch; ++ic) {
      const double *ip = in.channel(ic);
      const double *w = layer.w.data() + (static_cast<size_t>(o) * layer.in_ch + ic) * 9;
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          double acc = 0;
          for (int dr = -1; dr <= 1; ++dr) {
            const int rr = r + dr;
            if (rr < 0 || rr >= rows) continue;
            for (int dc = -1; dc <= 1; ++dc) {
              const int cc = c + dc;
              if (cc < 0 || cc >= cols) continue;
              acc += w[(dr + 1) * 3 + (dc + 1)] * ip[rr * cols + cc];
            }
          }
          op[r * cols + c] += acc;
        }
    }
  }
}

void conv3x3_backward_input(const ConvLayer &layer, const RTensor &gout, RTensor &gin) {
  const int rows = gout.rows, cols = gout.cols;
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < layer.in_ch; ++ic) {
    double *gp = gin.channel(ic);
    for (int o = 0; o < layer.out_ch; ++o) {
      const double *go = gout.channel(o);
      const double *w = layer.w.data() + (static_cast<size_t>(o) * layer.in_ch + ic) * 9;
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          double acc = 0;
          for (int dr = -1; dr <= 1; ++dr) {
            const int rr = r - dr;
            if (rr < 0 || rr >= rows) continue;
            for (int dc = -1; dc <= 1; ++dc) {
              const int cc = c - dc;
              if (cc < 0 || cc >= cols) continue;
              acc += w[(dr + 1) * 3 + (dc + 1)] * go[rr * cols + cc];
            }
          }
          gp[r * cols + c] += acc;
        }
    }
  }
}

void conv3x3_backward_params(const RTensor &in, const RTensor &gout,
                             std::vector<double> &gw, std::vector<double> &gb) {
  const int rows = in.rows, cols = in.cols;
#pragma omp parallel for schedule(static)
  for (int o = 0; o < gout.ch; ++o) {
    const double *go = gout.channel(o);
    double bacc = 0;
    for (int i = 0; i < rows * cols; ++i) bacc += go[i];
    gb[o] += bacc;
    for (int ic = 0; ic < in.ch; ++ic) {
      const double *ip = in.channel(ic);
      double *w = gw.data() + (static_cast<size_t>(o) * in.ch + ic) * 9;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          double acc = 0;
          const int r0 = std::max(0, -dr), r1 = std::min(rows, rows - dr);
          const int c0 = std::max(0, -dc), c1 = std::min(cols, cols - dc);
          for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c)
              acc += go[r * cols + c] * ip[(r + dr) * cols + (c + dc)];
          w[(dr + 1) * 3 + (dc + 1)] += acc;
        }
    }
  }
}

Tape::C Tape::new_c(std::vector<cplx> v) {
  cvals_.push_back(std::move(v));
  cgrads_.emplace_back();
  return {static_cast<int>(cvals_.size()) - 1};
}

Tape::R Tape::new_r(RTensor v) {
  rvals_.push_back(std::move(v));
  rgrads_.emplace_back();
  return {static_cast<int>(rvals_.size()) - 1};
}

Tape::S Tape::new_s(double v) {
  svals_.push_back(v);
  sgrads_.push_back(0.0);
  return {static_cast<int>(svals_.size()) - 1};
}

std::vector<cplx> &Tape::cg(C x) {
  auto &g = cgrads_[x.id];
  if (g.empty()) g.assign(cvals_[x.id].size(), cplx(0));
  return g;
}

RTensor &Tape::rg(R x) {
  auto &g = rgrads_[x.id];
  if (g.v.empty()) {
    const RTensor &v = rvals_[x.id];
    g = RTensor(v.ch, v.rows, v.cols);
  }
  return g;
}

Tape::C Tape::c_input(std::vector<cplx> v) { return new_c(std::move(v)); }
Tape::S Tape::s_const(double v) { return new_s(v); }

Tape::S Tape::s_param(double v, double *external_grad) {
  S out = new_s(v);
  ops_.push_back([this, out, external_grad] { *external_grad += sgrads_[out.id]; });
  return out;
}

Tape::C Tape::c_add(C a, C b) {
  const auto &va = cvals_[a.id], &vb = cvals_[b.id];
  std::vector<cplx> v(va.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = va[i] + vb[i];
  C out = new_c(std::move(v));
  ops_.push_back([this, a, b, out] {
    const auto &g = cgrads_[out.id];
    if (g.empty()) return;
    auto &ga = cg(a);
    auto &gb = cg(b);
    for (size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
  return out;
}

Tape::C Tape::c_sub(C a, C b) {
  const auto &va = cvals_[a.id], &vb = cvals_[b.id];
  std::vector<cplx> v(va.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = va[i] - vb[i];
  C out = new_c(std::move(v));
  ops_.push_back([this, a, b, out] {
    const auto &g = cgrads_[out.id];
    if (g.empty()) return;
    auto &ga = cg(a);
    auto &gb = cg(b);
    for (size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
  return out;
}

Tape::C Tape::c_axpy(S s, double sign, C x, C y) {
  const double sv = sign * svals_[s.id];
  const auto &vx = cvals_[x.id], &vy = cvals_[y.id];
  std::vector<cplx> v(vx.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = vy[i] + sv * vx[i];
  C out = new_c(std::move(v));
  ops_.push_back([this, s, sign, x, y, out, sv] {
    const auto &g = cgrads_[out.id];
    if (g.empty()) return;
    auto &gx = cg(x);
    auto &gy = cg(y);
    const auto &vx = cvals_[x.id];
    double gs = 0;
    for (size_t i = 0; i < g.size(); ++i) {
      gy[i] += g[i];
      gx[i] += sv * g[i];
      gs += g[i].real() * vx[i].real() + g[i].imag() * vx[i].imag();
    }
    sgrads_[s.id] += sign * gs;
  });
  return out;
}

Tape::C Tape::c_scale(S s, C x) {
  const double sv = svals_[s.id];
  const auto &vx = cvals_[x.id];
  std::vector<cplx> v(vx.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = sv * vx[i];
  C out = new_c(std::move(v));
  ops_.push_back([this, s, x, out, sv] {
    const auto &g = cgrads_[out.id];
    if (g.empty()) return;
    auto &gx = cg(x);
    const auto &vx = cvals_[x.id];
    double gs = 0;
    for (size_t i = 0; i < g.size(); ++i) {
      gx[i] += sv * g[i];
      gs += g[i].real() * vx[i].real() + g[i].imag() * vx[i].imag();
    }
    sgrads_[s.id] += gs;
  });
  return out;
}

Tape::C Tape::c_toeplitz(const ToeplitzKernel *k, const CoilMaps *maps, C x) {
  const Grid grid = k->image_grid;
  std::vector<cplx> v(cvals_[x.id].size());
  toeplitz_apply(*k, *maps, cvals_[x.id].data(), v.data(), grid);
  C out = new_c(std::move(v));
  ops_.push_back([this, k, maps, x, out, grid] {
    const auto &g = cgrads_[out.id];
    if (g.empty()) return;
    auto &gx = cg(x);
    std::vector<cplx> tmp(g.size());
    toeplitz_apply(*k, *maps, g.data(), tmp.data(), grid);  // self-adjoint for real weights
    for (size_t i = 0; i < g.size(); ++i) gx[i] += tmp[i];
  });
  return out;
}

Tape::C Tape::c_normal_apply(const ToeplitzKernel *k, const CoilMaps *maps, S mu, C x) {
  const Grid grid = k->image_grid;
  const double muv = svals_[mu.id];
  const auto &vx = cvals_[x.id];
  std::vector<cplx> v(vx.size());
  toeplitz_apply(*k, *maps, vx.data(), v.data(), grid);
  for (size_t i = 0; i < v.size(); ++i) v[i] += muv * vx[i];
  C out = new_c(std::move(v));
  ops_.push_back([this, k, maps, mu, x, out, grid, muv] {
    const auto &g = cgrads_[out.id];
    if (g.empty()) return;
    auto &gx = cg(x);
    const auto &vx = cvals_[x.id];
    std::vector<cplx> tmp(g.size());
    toeplitz_apply(*k, *maps, g.data(), tmp.data(), grid);
    double gmu = 0;
    for (size_t i = 0; i < g.size(); ++i) {
      gx[i] += tmp[i] + muv * g[i];
      gmu += g[i].real() * vx[i].real() + g[i].imag() * vx[i].imag();
    }
    sgrads_[mu.id] += gmu;
  });
  return out;
}

Tape::S Tape::c_dot_re(C a, C b) {
  const auto &va = cvals_[a.id], &vb = cvals_[b.id];
  double v = 0;
  for (size_t i = 0; i < va.size(); ++i)
    v += va[i].real() * vb[i].real() + va[i].imag() * vb[i].imag();
  S out = new_s(v);
  ops_.push_back([this, a, b, out] {
    const double g = sgrads_[out.id];
    if (g == 0) return;
    auto &ga = cg(a);
    auto &gb = cg(b);
    const auto &va = cvals_[a.id];
    const auto &vb = cvals_[b.id];
    for (size_t i = 0; i < va.size(); ++i) {
      ga[i] += g * vb[i];
      gb[i] += g * va[i];
    }
  });
  return out;
}

Tape::S Tape::s_div(S a, S b) {
  const double va = svals_[a.id], vb = svals_[b.id];
  S out = new_s(va / vb);
  ops_.push_back([this, a, b, out, va, vb] {
    const double g = sgrads_[out.id];
    sgrads_[a.id] += g / vb;
    sgrads_[b.id] -= g * va / (vb * vb);
  });
  return out;
}

Tape::S Tape::s_exp(S a) {
  const double v = std::exp(svals_[a.id]);
  S out = new_s(v);
  ops_.push_back([this, a, out, v] { sgrads_[a.id] += sgrads_[out.id] * v; });
  return out;
}

Tape::R Tape::pack(const std::vector<C> &echoes, Grid grid) {
  grid_ = grid;
  RTensor t(2 * static_cast<int>(echoes.size()), grid.rows, grid.cols);
  for (size_t e = 0; e < echoes.size(); ++e) {
    const auto &v = cvals_[echoes[e].id];
    double *re = t.channel(2 * static_cast<int>(e));
    double *im = t.channel(2 * static_cast<int>(e) + 1);
    for (int i = 0; i < grid.pixels(); ++i) {
      re[i] = v[i].real();
      im[i] = v[i].imag();
    }
  }
  R out = new_r(std::move(t));
  std::vector<int> ids(echoes.size());
  for (size_t e = 0; e < echoes.size(); ++e) ids[e] = echoes[e].id;
  ops_.push_back([this, ids, out, grid] {
    const RTensor &g = rgrads_[out.id];
    if (g.v.empty()) return;
    for (size_t e = 0; e < ids.size(); ++e) {
      auto &gc = cg({ids[e]});
      const double *re = g.channel(2 * static_cast<int>(e));
      const double *im = g.channel(2 * static_cast<int>(e) + 1);
      for (int i = 0; i < grid.pixels(); ++i) gc[i] += cplx(re[i], im[i]);
    }
  });
  return out;
}

std::vector<Tape::C> Tape::unpack(R t, int echoes) {
  const RTensor &v = rvals_[t.id];
  const int n = v.rows * v.cols;
  std::vector<C> out(echoes);
  for (int e = 0; e < echoes; ++e) {
    std::vector<cplx> c(static_cast<size_t>(n));
    const double *re = v.channel(2 * e);
    const double *im = v.channel(2 * e + 1);
    for (int i = 0; i < n; ++i) c[i] = cplx(re[i], im[i]);
    out[e] = new_c(std::move(c));
    C oc = out[e];
    ops_.push_back([this, t, oc, e, n] {
      const auto &g = cgrads_[oc.id];
      if (g.empty()) return;
      RTensor &gt = rg(t);
      double *re = gt.channel(2 * e);
      double *im = gt.channel(2 * e + 1);
      for (int i = 0; i < n; ++i) {
        re[i] += g[i].real();
        im[i] += g[i].imag();
      }
    });
  }
  return out;
}

Tape::R Tape::conv3x3(R in, const ConvLayer *layer, std::vector<double> *gw, std::vector<double> *gb) {
  RTensor out_t;
  conv3x3_forward(rvals_[in.id], *layer, out_t);
  R out = new_r(std::move(out_t));
  ops_.push_back([this, in, out, layer, gw, gb] {
    const RTensor &g = rgrads_[out.id];
    if (g.v.empty()) return;
    RTensor &gin = rg(in);
    conv3x3_backward_input(*layer, g, gin);
    conv3x3_backward_params(rvals_[in.id], g, *gw, *gb);
  });
  return out;
}

Tape::R Tape::relu(R in) {
  const RTensor &v = rvals_[in.id];
  RTensor t(v.ch, v.rows, v.cols);
  for (size_t i = 0; i < v.v.size(); ++i) t.v[i] = v.v[i] > 0 ? v.v[i] : 0.0;
  R out = new_r(std::move(t));
  ops_.push_back([this, in, out] {
    const RTensor &g = rgrads_[out.id];
    if (g.v.empty()) return;
    RTensor &gin = rg(in);
    const RTensor &v = rvals_[in.id];
    for (size_t i = 0; i < v.v.size(); ++i)
      if (v.v[i] > 0) gin.v[i] += g.v[i];
  });
  return out;
}

Tape::R Tape::r_add(R a, R b) {
  const RTensor &va = rvals_[a.id], &vb = rvals_[b.id];
  RTensor t(va.ch, va.rows, va.cols);
  for (size_t i = 0; i < t.v.size(); ++i) t.v[i] = va.v[i] + vb.v[i];
  R out = new_r(std::move(t));
  ops_.push_back([this, a, b, out] {
    const RTensor &g = rgrads_[out.id];
    if (g.v.empty()) return;
    RTensor &ga = rg(a);
    RTensor &gb = rg(b);
    for (size_t i = 0; i < g.v.size(); ++i) {
      ga.v[i] += g.v[i];
      gb.v[i] += g.v[i];
    }
  });
  return out;
}

Tape::S Tape::mixed_loss(const std::vector<C> &a, const ImageStack *target) {
  const size_t n = static_cast<size_t>(target->grid.pixels());
  double d2 = 0, d1 = 0, b2 = 0, b1 = 0;
  for (size_t e = 0; e < a.size(); ++e) {
    const auto &va = cvals_[a[e].id];
    const cplx *b = target->echo(static_cast<int>(e));
    for (size_t i = 0; i < n; ++i) {
      const cplx d = b[i] - va[i];
      d2 += std::norm(d);
      d1 += std::abs(d);
      b2 += std::norm(b[i]);
      b1 += std::abs(b[i]);
    }
  }
  const double nd2 = std::sqrt(d2), nb2 = std::sqrt(b2);
  if (nb2 == 0 || b1 == 0) throw std::domain_error("mixed_loss: zero target");
  S out = new_s(nd2 / nb2 + d1 / b1);
  std::vector<int> ids(a.size());
  for (size_t e = 0; e < a.size(); ++e) ids[e] = a[e].id;
  ops_.push_back([this, ids, target, out, nd2, nb2, b1, n] {
    const double g = sgrads_[out.id];
    if (g == 0) return;
    for (size_t e = 0; e < ids.size(); ++e) {
      auto &ga = cg({ids[e]});
      const auto &va = cvals_[ids[e]];
      const cplx *b = target->echo(static_cast<int>(e));
      for (size_t i = 0; i < n; ++i) {
        const cplx d = b[i] - va[i];
        cplx grad(0, 0);
        if (nd2 > 0) grad += d / (nd2 * nb2);
        const double ad = std::abs(d);
        if (ad > 0) grad += d / (ad * b1);
        ga[i] -= g * grad;
      }
    }
  });
  return out;
}

void Tape::backward(S loss, double seed) {
  for (auto &g : cgrads_) g.clear();
  for (auto &g : rgrads_) g.v.clear();
  std::fill(sgrads_.begin(), sgrads_.end(), 0.0);
  sgrads_[loss.id] = seed;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

}  // namespace mespi
