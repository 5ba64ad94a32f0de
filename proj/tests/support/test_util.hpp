#pragma once

#include <cmath>
#include <cstdlib>
#include <string>

#include "hlic/metrics.hpp"
#include "hlic/rng.hpp"

namespace hlic::test {

inline std::string data_dir() {
  const char* d = std::getenv("HLIC_TEST_DATA");
  return d ? d : "tests/data";
}

inline std::string bundled_data_dir() {
  const char* d = std::getenv("HLIC_DATA");
  return d ? d : "data";
}

// Smooth synthetic test image: sum of low-frequency cosines around
// mid-gray, clamped to [0, 255].
inline Image synth_image(Rng& rng, int width, int height,
                         int components = 12) {
  Image img = Image::zeros(width, height);
  struct Wave {
    double fx, fy, amp, phase;
  };
  std::vector<Wave> waves(static_cast<size_t>(components));
  for (Wave& w : waves) {
    w.fx = rng.uniform(-0.08, 0.08);
    w.fy = rng.uniform(-0.08, 0.08);
    const double fmag = std::max(std::hypot(w.fx, w.fy), 1e-3);
    w.amp = rng.uniform(10.0, 45.0) * std::min(1.0, 0.02 / fmag + 0.3);
    w.phase = rng.uniform(0.0, 6.283185307179586);
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = 128.0;
      for (const Wave& w : waves) {
        v += w.amp *
             std::cos(6.283185307179586 * (w.fx * x + w.fy * y) + w.phase);
      }
      img.at(y, x) = std::min(255.0, std::max(0.0, v));
    }
  }
  return img;
}

}  // namespace hlic::test
