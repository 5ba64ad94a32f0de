#pragma once

#include <vector>

#include "hlic/autodiff.hpp"

namespace hlic {

// Planar grayscale raster. Values live on [0, peak].
struct Image {
  int width = 0;
  int height = 0;
  double peak = 255.0;
  std::vector<double> data;  // row-major, height * width

  static Image zeros(int width, int height, double peak = 255.0);

  double& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  double at(int y, int x) const {
    return data[static_cast<size_t>(y) * width + x];
  }

  // Checks dimensions and the [0, peak] value range.
  void validate() const;

  Tensor to_tensor() const;  // [height, width]
};

struct MsSsimConfig {
  int n_scales = 5;
  std::vector<double> scale_weights = {0.0448, 0.2856, 0.3001, 0.2363,
                                       0.1333};
  int window_radius = 5;
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 255.0;

  // The pyramid is blur-then-halve: each level consumes 2*radius border
  // pixels and then halves, so level sizes follow
  // s[j+1] = floor((s[j] - 2*radius) / 2).
  static int max_feasible_scales(int width, int height, int window_radius);
  static int min_side_for_scales(int n_scales, int window_radius);

  // Copy with n_scales reduced and weights renormalized to sum 1.
  MsSsimConfig reduced_to(int scales) const;
};

double mse(const Image& x, const Image& xhat);
double psnr(const Image& x, const Image& xhat, double cap_db = 100.0);

// Multi-scale structural similarity with the exact config given; throws if
// the image is too small for cfg.n_scales.
double ms_ssim(const Image& x, const Image& xhat, const MsSsimConfig& cfg);

// Reduces the scale count to the maximum the image supports, then evaluates.
double ms_ssim_auto(const Image& x, const Image& xhat,
                    const MsSsimConfig& cfg);

// Mean forward-difference magnitude on the [0,1]-normalized scale,
// horizontal and vertical terms summed.
double total_variation(const Image& x);

// Mean absolute difference of the two images' forward-difference gradient
// fields, both axes, [0,1]-normalized scale.
double gradient_loss(const Image& x, const Image& xhat);

// Differentiable twins over [h,w] tensors on the [0, peak] scale. They follow
// the scalar pipeline exactly.
Value ms_ssim_graph(Graph& g, Value x, Value y, const MsSsimConfig& cfg);
Value mse_graph(Graph& g, Value x, Value y);

}  // namespace hlic
