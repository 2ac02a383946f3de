#pragma once

#include <functional>

#include "mespi/operators.hpp"

namespace mespi {

// Real tensor, (channel, row, col).
struct RTensor {
  int ch = 0, rows = 0, cols = 0;
  std::vector<double> v;

  RTensor() = default;
  RTensor(int c, int r, int co) : ch(c), rows(r), cols(co), v(static_cast<size_t>(c) * r * co, 0.0) {}
  double *channel(int c) { return v.data() + static_cast<size_t>(c) * rows * cols; }
  const double *channel(int c) const { return v.data() + static_cast<size_t>(c) * rows * cols; }
};

// 3x3 same-padding convolution layer.
struct ConvLayer {
  int in_ch = 0, out_ch = 0;
  std::vector<double> w;  // (out, in, 3, 3)
  std::vector<double> b;  // (out)
};

void conv3x3_forward(const RTensor &in, const ConvLayer &layer, RTensor &out);
void conv3x3_backward_input(const ConvLayer &layer, const RTensor &gout, RTensor &gin);
void conv3x3_backward_params(const RTensor &in, const RTensor &gout,
                             std::vector<double> &gw, std::vector<double> &gb);

// Reverse-mode tape over complex images (one echo each), real tensors and
// real scalars. Gradient convention for complex values: grad holds
// dL/dRe + i dL/dIm, so a linear op y = A x propagates gx += A^H gy.
class Tape {
public:
  struct C { int id = -1; };
  struct R { int id = -1; };
  struct S { int id = -1; };

  // leaves
  C c_input(std::vector<cplx> v);
  S s_const(double v);
  S s_param(double v, double *external_grad);

  // complex image ops
  C c_add(C a, C b);
  C c_sub(C a, C b);
  C c_axpy(S s, double sign, C x, C y);  // y + sign * s * x, s real
  C c_scale(S s, C x);                   // s * x, s real
  C c_toeplitz(const ToeplitzKernel *k, const CoilMaps *maps, C x);
  C c_normal_apply(const ToeplitzKernel *k, const CoilMaps *maps, S mu, C x);  // T x + mu x
  S c_dot_re(C a, C b);                  // sum Re(conj(a) b)

  // scalar ops
  S s_div(S a, S b);
  S s_exp(S a);

  // real tensor ops / complex bridge
  R pack(const std::vector<C> &echoes, Grid grid);  // 2E channels (re, im per echo)
  std::vector<C> unpack(R t, int echoes);
  R conv3x3(R in, const ConvLayer *layer, std::vector<double> *gw, std::vector<double> *gb);
  R relu(R in);
  R r_add(R a, R b);

  // ||b-a||_2/||b||_2 + ||b-a||_1/||b||_1, echoes jointly; b constant
  S mixed_loss(const std::vector<C> &a, const ImageStack *target);

  const std::vector<cplx> &cval(C x) const { return cvals_[x.id]; }
  const RTensor &rval(R x) const { return rvals_[x.id]; }
  double sval(S x) const { return svals_[x.id]; }

  // Reverse pass from a scalar node. Gradients of s_param/conv leaves are
  // accumulated into the external buffers handed in at op creation.
  void backward(S loss, double seed = 1.0);

  std::vector<cplx> &cgrad(C x) { return cgrads_[x.id]; }
  double sgrad(S x) const { return sgrads_[x.id]; }

private:
  C new_c(std::vector<cplx> v);
  R new_r(RTensor v);
  S new_s(double v);
  std::vector<cplx> &cg(C x);
  RTensor &rg(R x);

  std::vector<std::vector<cplx>> cvals_, cgrads_;
  std::vector<RTensor> rvals_, rgrads_;
  std::vector<double> svals_, sgrads_;
  Grid grid_{};
  std::vector<std::function<void()>> ops_;
};

}  // namespace mespi
