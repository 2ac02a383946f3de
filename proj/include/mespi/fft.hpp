#pragma once

#include "mespi/core.hpp"

namespace mespi {

// Centered 2D DFT: DC at pixel (floor(rows/2), floor(cols/2)) in both domains.
// fft2c is unnormalized (sign -1); ifft2c carries the 1/(rows*cols) factor.
void fft2c(cplx *data, int rows, int cols);
void ifft2c(cplx *data, int rows, int cols);

void fft2c(Image &img);
void ifft2c(Image &img);

// Plain (DC at index 0) transforms, no shifting; ifft2 carries 1/(rows*cols).
void fft2(cplx *data, int rows, int cols);
void ifft2(cplx *data, int rows, int cols);

}  // namespace mespi
