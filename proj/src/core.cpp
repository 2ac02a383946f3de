#include "mespi/core.hpp"

#include <cmath>

namespace mespi {

uint64_t CounterRng::mix(uint64_t seed, uint64_t counter) {
  // splitmix64 finalizer applied to seed ^ golden-ratio-spread counter
  uint64_t z = seed + counter * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t CounterRng::next_u64() { return mix(seed_, ++counter_); }

double CounterRng::uniform() {
  // 53 high bits -> [0,1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * M_PI * u2;
  spare_ = r * std::sin(phi);
  have_spare_ = true;
  return r * std::cos(phi);
}

void CounterRng::shuffle(std::vector<int> &idx) {
  for (size_t i = idx.size(); i > 1; --i) {
    const size_t j = next_u64() % i;
    std::swap(idx[i - 1], idx[j]);
  }
}

double norm2(const cplx *v, size_t n) {
  double s = 0;
  for (size_t i = 0; i < n; ++i) s += std::norm(v[i]);
  return std::sqrt(s);
}

double norm2(const std::vector<cplx> &v) { return norm2(v.data(), v.size()); }

double norm1(const cplx *v, size_t n) {
  double s = 0;
  for (size_t i = 0; i < n; ++i) s += std::abs(v[i]);
  return s;
}

cplx dot(const cplx *a, const cplx *b, size_t n) {
  cplx s = 0;
  for (size_t i = 0; i < n; ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double rel_err(const std::vector<cplx> &got, const std::vector<cplx> &want) {
  if (got.size() != want.size()) throw std::invalid_argument("rel_err: size mismatch");
  double num = 0, den = 0;
  for (size_t i = 0; i < got.size(); ++i) {
    num += std::norm(got[i] - want[i]);
    den += std::norm(want[i]);
  }
  if (den == 0) return std::sqrt(num);
  return std::sqrt(num / den);
}

double nrmse(const ImageStack &got, const ImageStack &want) {
  if (got.size() != want.size()) throw std::invalid_argument("nrmse: size mismatch");
  double num = 0, den = 0;
  for (size_t i = 0; i < got.size(); ++i) {
    num += std::norm(std::abs(got.v[i]) - std::abs(want.v[i]));
    den += std::norm(std::abs(want.v[i]));
  }
  return std::sqrt(num / den);
}

}  // namespace mespi
