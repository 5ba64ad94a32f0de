#include "hlic/synthdata.hpp"

#include <algorithm>
#include <cmath>

#include "hlic/error.hpp"
#include "hlic/rng.hpp"

namespace hlic {

std::vector<Image> synthetic_images(int count, int width, int height,
                                    uint64_t seed) {
  if (count < 1 || width < 1 || height < 1) {
    throw InvalidInput("synthetic_images: count and dimensions must be >= 1");
  }
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  Rng rng(seed);
  std::vector<Image> out;
  out.reserve(static_cast<size_t>(count));
  for (int n = 0; n < count; ++n) {
    Image img = Image::zeros(width, height);
    struct Wave {
      double fx, fy, amp, phase;
    };
    const int waves = 10 + static_cast<int>(rng.below(8));
    std::vector<Wave> ws(static_cast<size_t>(waves));
    for (Wave& w : ws) {
      w.fx = rng.uniform(-0.09, 0.09);
      w.fy = rng.uniform(-0.09, 0.09);
      const double fmag = std::max(std::hypot(w.fx, w.fy), 1e-3);
      w.amp = rng.uniform(8.0, 42.0) * std::min(1.0, 0.02 / fmag + 0.3);
      w.phase = rng.uniform(0.0, kTwoPi);
    }
    // Mid-band texture: fine enough to be expensive, coarse enough to stay
    // representable by a low-frequency block transform.
    const int texture = 6 + static_cast<int>(rng.below(5));
    for (int k = 0; k < texture; ++k) {
      Wave w;
      w.fx = rng.uniform(-0.18, 0.18);
      w.fy = rng.uniform(-0.18, 0.18);
      const double l1 = std::fabs(w.fx) + std::fabs(w.fy);
      if (l1 < 0.08) {
        w.fx += w.fx >= 0 ? 0.08 : -0.08;
      }
      w.amp = rng.uniform(3.0, 10.0);
      w.phase = rng.uniform(0.0, kTwoPi);
      ws.push_back(w);
    }
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double v = 128.0;
        for (const Wave& w : ws) {
          v += w.amp * std::cos(kTwoPi * (w.fx * x + w.fy * y) + w.phase);
        }
        img.at(y, x) = v;
      }
    }
    // A few rectangular steps give the codec some edges to spend bits on.
    const int rects = 2 + static_cast<int>(rng.below(3));
    for (int k = 0; k < rects; ++k) {
      int y0 = static_cast<int>(rng.below(static_cast<uint64_t>(height)));
      int y1 = static_cast<int>(rng.below(static_cast<uint64_t>(height)));
      int x0 = static_cast<int>(rng.below(static_cast<uint64_t>(width)));
      int x1 = static_cast<int>(rng.below(static_cast<uint64_t>(width)));
      if (y0 > y1) std::swap(y0, y1);
      if (x0 > x1) std::swap(x0, x1);
      const double step = rng.uniform(-35.0, 35.0);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) img.at(y, x) += step;
      }
    }
    for (double& v : img.data) v = std::min(255.0, std::max(0.0, v));
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace hlic
