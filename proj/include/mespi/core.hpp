#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mespi {

using cplx = std::complex<double>;

struct Grid {
  int rows = 0;
  int cols = 0;
  int pixels() const { return rows * cols; }
  bool operator==(const Grid &) const = default;
};

// Complex 2D image, row-major.
struct Image {
  Grid grid;
  std::vector<cplx> v;

  Image() = default;
  explicit Image(Grid g) : grid(g), v(static_cast<size_t>(g.pixels()), cplx(0)) {}
  cplx &at(int r, int c) { return v[static_cast<size_t>(r) * grid.cols + c]; }
  const cplx &at(int r, int c) const { return v[static_cast<size_t>(r) * grid.cols + c]; }
  size_t size() const { return v.size(); }
};

// Complex multi-echo image stack, (echo, row, col).
struct ImageStack {
  int echoes = 0;
  Grid grid;
  std::vector<cplx> v;

  ImageStack() = default;
  ImageStack(int e, Grid g) : echoes(e), grid(g), v(static_cast<size_t>(e) * g.pixels(), cplx(0)) {}
  cplx *echo(int e) { return v.data() + static_cast<size_t>(e) * grid.pixels(); }
  const cplx *echo(int e) const { return v.data() + static_cast<size_t>(e) * grid.pixels(); }
  size_t size() const { return v.size(); }
};

// Non-Cartesian sample locations in rad/pixel, shared across echoes.
struct Trajectory {
  std::vector<double> kx, ky;
  int arm_count = 0;
  int samples_per_arm = 0;
  int samples() const { return static_cast<int>(kx.size()); }
};

// Measured samples, (coil, echo, sample).
struct MultiEchoKSpace {
  int coils = 0;
  int echoes = 0;
  int samples = 0;
  std::vector<cplx> v;

  MultiEchoKSpace() = default;
  MultiEchoKSpace(int c, int e, int m)
      : coils(c), echoes(e), samples(m), v(static_cast<size_t>(c) * e * m, cplx(0)) {}
  cplx *channel(int c, int e) {
    return v.data() + (static_cast<size_t>(c) * echoes + e) * samples;
  }
  const cplx *channel(int c, int e) const {
    return v.data() + (static_cast<size_t>(c) * echoes + e) * samples;
  }
};

struct CoilMaps {
  int coil_count = 0;
  Grid grid;
  std::vector<cplx> maps;

  CoilMaps() = default;
  CoilMaps(int c, Grid g) : coil_count(c), grid(g), maps(static_cast<size_t>(c) * g.pixels(), cplx(0)) {}
  cplx *coil(int c) { return maps.data() + static_cast<size_t>(c) * grid.pixels(); }
  const cplx *coil(int c) const { return maps.data() + static_cast<size_t>(c) * grid.pixels(); }
};

// Counter-based RNG: splitmix64 over (seed, counter). Identical streams on
// every platform, any call order given the same counters.
class CounterRng {
public:
  explicit CounterRng(uint64_t seed) : seed_(seed) {}

  double uniform();               // [0, 1)
  double normal();                // standard normal, Box-Muller
  uint64_t next_u64();
  // Fisher-Yates using this stream.
  void shuffle(std::vector<int> &idx);

  static uint64_t mix(uint64_t seed, uint64_t counter);

private:
  uint64_t seed_;
  uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

double norm2(const std::vector<cplx> &v);
double norm2(const cplx *v, size_t n);
double norm1(const cplx *v, size_t n);
cplx dot(const cplx *a, const cplx *b, size_t n);  // sum conj(a) * b
double rel_err(const std::vector<cplx> &got, const std::vector<cplx> &want);
double nrmse(const ImageStack &got, const ImageStack &want);

}  // namespace mespi
