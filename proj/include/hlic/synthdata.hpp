#pragma once

#include <cstdint>
#include <vector>

#include "hlic/metrics.hpp"

namespace hlic {

// Deterministic procedural grayscale images: smooth low-frequency cosine
// fields with a few rectangular edges, clamped to [0, 255]. Used as the
// bundled dataset for the toy codec.
std::vector<Image> synthetic_images(int count, int width, int height,
                                    uint64_t seed);

}  // namespace hlic
