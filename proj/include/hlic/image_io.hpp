#pragma once

#include <string>

#include "hlic/metrics.hpp"

namespace hlic {

// Reads an 8-bit binary PGM (P5) or PPM (P6). PPM input is converted to
// grayscale with luma weights (0.299, 0.587, 0.114). Values stay on
// [0, 255] with peak 255.
Image read_image(const std::string& path);

// Writes a binary PGM, rounding to the nearest integer and clamping to
// [0, 255].
void write_pgm(const Image& img, const std::string& path);

}  // namespace hlic
