#include "mespi/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace mespi {
namespace {

std::mutex plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> plan_cache;

fftw_plan get_plan(int rows, int cols, int sign) {
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto key = std::make_tuple(rows, cols, sign);
  auto it = plan_cache.find(key);
  if (it != plan_cache.end()) return it->second;
  std::vector<cplx> tmp(static_cast<size_t>(rows) * cols);
  fftw_plan p = fftw_plan_dft_2d(rows, cols,
                                 reinterpret_cast<fftw_complex *>(tmp.data()),
                                 reinterpret_cast<fftw_complex *>(tmp.data()), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  plan_cache[key] = p;
  return p;
}

// circular shift by (dr, dc), in place via scratch
void circshift(cplx *data, int rows, int cols, int dr, int dc) {
  std::vector<cplx> tmp(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    const int r2 = (r + dr) % rows;
    for (int c = 0; c < cols; ++c) {
      const int c2 = (c + dc) % cols;
      tmp[static_cast<size_t>(r2) * cols + c2] = data[static_cast<size_t>(r) * cols + c];
    }
  }
  std::copy(tmp.begin(), tmp.end(), data);
}

void fft2c_impl(cplx *data, int rows, int cols, int sign) {
  const int hr = rows / 2, hc = cols / 2;
  // ifftshift: move center to index 0
  circshift(data, rows, cols, rows - hr, cols - hc);
  fftw_plan p = get_plan(rows, cols, sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex *>(data),
                   reinterpret_cast<fftw_complex *>(data));
  // fftshift
  circshift(data, rows, cols, hr, hc);
}

}  // namespace

void fft2c(cplx *data, int rows, int cols) { fft2c_impl(data, rows, cols, FFTW_FORWARD); }

void ifft2c(cplx *data, int rows, int cols) {
  fft2c_impl(data, rows, cols, FFTW_BACKWARD);
  const double scale = 1.0 / (static_cast<double>(rows) * cols);
  const size_t n = static_cast<size_t>(rows) * cols;
  for (size_t i = 0; i < n; ++i) data[i] *= scale;
}

void fft2(cplx *data, int rows, int cols) {
  fftw_plan p = get_plan(rows, cols, FFTW_FORWARD);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex *>(data),
                   reinterpret_cast<fftw_complex *>(data));
}

void ifft2(cplx *data, int rows, int cols) {
  fftw_plan p = get_plan(rows, cols, FFTW_BACKWARD);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex *>(data),
                   reinterpret_cast<fftw_complex *>(data));
  const double scale = 1.0 / (static_cast<double>(rows) * cols);
  const size_t n = static_cast<size_t>(rows) * cols;
  for (size_t i = 0; i < n; ++i) data[i] *= scale;
}

void fft2c(Image &img) { fft2c(img.v.data(), img.grid.rows, img.grid.cols); }
void ifft2c(Image &img) { ifft2c(img.v.data(), img.grid.rows, img.grid.cols); }

}  // namespace mespi
