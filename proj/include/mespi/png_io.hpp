#pragma once

#include <cstdint>

#include "mespi/core.hpp"

namespace mespi {

void write_png_gray(const std::string &path, const std::vector<uint8_t> &pixels,
                    int width, int height);

// Horizontal montage of echo magnitudes, windowed at the given percentile
// of the combined magnitude distribution (default 99th).
void write_magnitude_montage(const std::string &path, const ImageStack &stack,
                             double window_percentile = 99.0);

// Sign-symmetric window: negative values dark, positive bright, zero mid-gray.
void write_signed_map(const std::string &path, const std::vector<double> &map, Grid grid);

}  // namespace mespi
