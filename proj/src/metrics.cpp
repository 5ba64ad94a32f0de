#include "hlic/metrics.hpp"

#include <cmath>
#include <string>

#include "hlic/error.hpp"

namespace hlic {

namespace {

constexpr double kMsSsimTermFloor = 1e-9;  // guards pow of a negative term

void require_same_geometry(const Image& a, const Image& b, const char* op) {
  if (a.width != b.width || a.height != b.height) {
    throw InvalidInput(std::string(op) + ": size mismatch " +
                       std::to_string(a.width) + "x" + std::to_string(a.height) +
                       " vs " + std::to_string(b.width) + "x" +
                       std::to_string(b.height));
  }
  if (a.peak != b.peak) {
    throw InvalidInput(std::string(op) + ": peak mismatch " +
                       std::to_string(a.peak) + " vs " +
                       std::to_string(b.peak));
  }
}

struct Mat {
  int h = 0, w = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0.0) {}
  double* row(int i) { return v.data() + static_cast<size_t>(i) * w; }
  const double* row(int i) const {
    return v.data() + static_cast<size_t>(i) * w;
  }
};

Mat blur_valid(const Mat& in, const std::vector<double>& kern) {
  const int r = (static_cast<int>(kern.size()) - 1) / 2;
  const int wo = in.w - 2 * r, ho = in.h - 2 * r;
  Mat tmp(in.h, wo);
  for (int i = 0; i < in.h; ++i) {
    const double* src = in.row(i);
    double* dst = tmp.row(i);
    for (int j = 0; j < wo; ++j) {
      double s = 0.0;
      for (int t = 0; t <= 2 * r; ++t) s += kern[t] * src[j + t];
      dst[j] = s;
    }
  }
  Mat out(ho, wo);
  for (int i = 0; i < ho; ++i) {
    double* dst = out.row(i);
    for (int t = 0; t <= 2 * r; ++t) {
      const double kv = kern[t];
      const double* src = tmp.row(i + t);
      for (int j = 0; j < wo; ++j) dst[j] += kv * src[j];
    }
  }
  return out;
}

Mat downsample2(const Mat& in) {
  Mat out(in.h / 2, in.w / 2);
  for (int i = 0; i < out.h; ++i) {
    const double* r0 = in.row(2 * i);
    const double* r1 = in.row(2 * i + 1);
    double* dst = out.row(i);
    for (int j = 0; j < out.w; ++j) {
      dst[j] = 0.25 * (r0[2 * j] + r0[2 * j + 1] + r1[2 * j] + r1[2 * j + 1]);
    }
  }
  return out;
}

double mat_mean(const Mat& m) {
  double s = 0.0;
  for (double x : m.v) s += x;
  return s / static_cast<double>(m.v.size());
}

std::vector<double> renormalized_weights(const MsSsimConfig& cfg, int scales) {
  if (static_cast<int>(cfg.scale_weights.size()) < scales) {
    throw InvalidInput("ms_ssim: " + std::to_string(scales) +
                       " scales requested but only " +
                       std::to_string(cfg.scale_weights.size()) +
                       " weights configured");
  }
  std::vector<double> w(cfg.scale_weights.begin(),
                        cfg.scale_weights.begin() + scales);
  double sum = 0.0;
  for (double x : w) sum += x;
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace

Image Image::zeros(int width, int height, double peak) {
  Image img;
  img.width = width;
  img.height = height;
  img.peak = peak;
  img.data.assign(static_cast<size_t>(width) * height, 0.0);
  return img;
}

void Image::validate() const {
  if (width < 1 || height < 1) {
    throw InvalidInput("image: dimensions must be at least 1x1");
  }
  if (data.size() != static_cast<size_t>(width) * height) {
    throw InvalidInput("image: buffer size does not match dimensions");
  }
  if (peak <= 0.0) throw InvalidInput("image: peak must be positive");
  for (double v : data) {
    if (!(v >= 0.0 && v <= peak)) {
      throw InvalidInput("image: value " + std::to_string(v) +
                         " outside [0, " + std::to_string(peak) + "]");
    }
  }
}

Tensor Image::to_tensor() const {
  Tensor t;
  t.shape = {height, width};
  t.data = data;
  return t;
}

int MsSsimConfig::max_feasible_scales(int width, int height,
                                      int window_radius) {
  int side = width < height ? width : height;
  const int wsize = 2 * window_radius + 1;
  int scales = 0;
  while (side >= wsize) {
    ++scales;
    side = (side - 2 * window_radius) / 2;
  }
  return scales;
}

int MsSsimConfig::min_side_for_scales(int n_scales, int window_radius) {
  int side = 2 * window_radius + 1;
  for (int j = 1; j < n_scales; ++j) side = 2 * side + 2 * window_radius;
  return side;
}

MsSsimConfig MsSsimConfig::reduced_to(int scales) const {
  MsSsimConfig out = *this;
  out.n_scales = scales;
  out.scale_weights = renormalized_weights(*this, scales);
  return out;
}

double mse(const Image& x, const Image& xhat) {
  require_same_geometry(x, xhat, "mse");
  double s = 0.0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - xhat.data[i];
    s += d * d;
  }
  return s / static_cast<double>(x.data.size());
}

double psnr(const Image& x, const Image& xhat, double cap_db) {
  const double m = mse(x, xhat);
  if (m == 0.0) return cap_db;
  const double value = 10.0 * std::log10(x.peak * x.peak / m);
  return value > cap_db ? cap_db : value;  // keeps observations bounded
}

double ms_ssim(const Image& x, const Image& xhat, const MsSsimConfig& cfg) {
  require_same_geometry(x, xhat, "ms_ssim");
  const int feasible =
      MsSsimConfig::max_feasible_scales(x.width, x.height, cfg.window_radius);
  if (cfg.n_scales < 1) throw InvalidInput("ms_ssim: n_scales must be >= 1");
  if (feasible < cfg.n_scales) {
    throw InvalidInput(
        "ms_ssim: image " + std::to_string(x.width) + "x" +
        std::to_string(x.height) + " supports only " +
        std::to_string(feasible) + " scales; minimum side for " +
        std::to_string(cfg.n_scales) + " scales is " +
        std::to_string(MsSsimConfig::min_side_for_scales(cfg.n_scales,
                                                         cfg.window_radius)));
  }
  const std::vector<double> weights = renormalized_weights(cfg, cfg.n_scales);
  const std::vector<double> kern =
      gaussian_kernel(cfg.window_radius, cfg.window_sigma);
  const double c1 = cfg.k1 * cfg.peak * cfg.k1 * cfg.peak;
  const double c2 = cfg.k2 * cfg.peak * cfg.k2 * cfg.peak;

  Mat a(x.height, x.width), b(x.height, x.width);
  a.v = x.data;
  b.v = xhat.data;

  double result = 1.0;
  for (int scale = 0; scale < cfg.n_scales; ++scale) {
    Mat a2(a.h, a.w), b2(a.h, a.w), ab(a.h, a.w);
    for (size_t i = 0; i < a.v.size(); ++i) {
      a2.v[i] = a.v[i] * a.v[i];
      b2.v[i] = b.v[i] * b.v[i];
      ab.v[i] = a.v[i] * b.v[i];
    }
    Mat mu_a = blur_valid(a, kern);
    Mat mu_b = blur_valid(b, kern);
    Mat e_a2 = blur_valid(a2, kern);
    Mat e_b2 = blur_valid(b2, kern);
    Mat e_ab = blur_valid(ab, kern);

    double cs_sum = 0.0;
    for (size_t i = 0; i < mu_a.v.size(); ++i) {
      const double va = e_a2.v[i] - mu_a.v[i] * mu_a.v[i];
      const double vb = e_b2.v[i] - mu_b.v[i] * mu_b.v[i];
      const double cov = e_ab.v[i] - mu_a.v[i] * mu_b.v[i];
      cs_sum += (2.0 * cov + c2) / (va + vb + c2);
    }
    double mcs = cs_sum / static_cast<double>(mu_a.v.size());
    if (mcs < kMsSsimTermFloor) mcs = kMsSsimTermFloor;
    result *= std::pow(mcs, weights[static_cast<size_t>(scale)]);

    if (scale == cfg.n_scales - 1) {
      double l_sum = 0.0;
      for (size_t i = 0; i < mu_a.v.size(); ++i) {
        l_sum += (2.0 * mu_a.v[i] * mu_b.v[i] + c1) /
                 (mu_a.v[i] * mu_a.v[i] + mu_b.v[i] * mu_b.v[i] + c1);
      }
      double ml = l_sum / static_cast<double>(mu_a.v.size());
      if (ml < kMsSsimTermFloor) ml = kMsSsimTermFloor;
      result *= std::pow(ml, weights[static_cast<size_t>(scale)]);
    } else {
      a = downsample2(mu_a);
      b = downsample2(mu_b);
    }
  }
  return result;
}

double ms_ssim_auto(const Image& x, const Image& xhat,
                    const MsSsimConfig& cfg) {
  const int feasible =
      MsSsimConfig::max_feasible_scales(x.width, x.height, cfg.window_radius);
  if (feasible < 1) {
    throw InvalidInput(
        "ms_ssim: image " + std::to_string(x.width) + "x" +
        std::to_string(x.height) + " smaller than the " +
        std::to_string(2 * cfg.window_radius + 1) + "-tap window");
  }
  const int scales = feasible < cfg.n_scales ? feasible : cfg.n_scales;
  return ms_ssim(x, xhat, cfg.reduced_to(scales));
}

double total_variation(const Image& x) {
  double sum_h = 0.0, sum_v = 0.0;
  for (int i = 0; i < x.height; ++i) {
    for (int j = 0; j + 1 < x.width; ++j) {
      sum_h += std::fabs(x.at(i, j + 1) - x.at(i, j));
    }
  }
  for (int i = 0; i + 1 < x.height; ++i) {
    for (int j = 0; j < x.width; ++j) {
      sum_v += std::fabs(x.at(i + 1, j) - x.at(i, j));
    }
  }
  double tv = 0.0;
  if (x.width > 1) {
    tv += sum_h / (static_cast<double>(x.height) * (x.width - 1));
  }
  if (x.height > 1) {
    tv += sum_v / (static_cast<double>(x.height - 1) * x.width);
  }
  return tv / x.peak;
}

double gradient_loss(const Image& x, const Image& xhat) {
  require_same_geometry(x, xhat, "gradient_loss");
  double sum_h = 0.0, sum_v = 0.0;
  for (int i = 0; i < x.height; ++i) {
    for (int j = 0; j + 1 < x.width; ++j) {
      const double gx = x.at(i, j + 1) - x.at(i, j);
      const double gy = xhat.at(i, j + 1) - xhat.at(i, j);
      sum_h += std::fabs(gx - gy);
    }
  }
  for (int i = 0; i + 1 < x.height; ++i) {
    for (int j = 0; j < x.width; ++j) {
      const double gx = x.at(i + 1, j) - x.at(i, j);
      const double gy = xhat.at(i + 1, j) - xhat.at(i, j);
      sum_v += std::fabs(gx - gy);
    }
  }
  double gl = 0.0;
  if (x.width > 1) {
    gl += sum_h / (static_cast<double>(x.height) * (x.width - 1));
  }
  if (x.height > 1) {
    gl += sum_v / (static_cast<double>(x.height - 1) * x.width);
  }
  return gl / x.peak;
}

Value mse_graph(Graph& g, Value x, Value y) {
  Value d = g.sub(x, y);
  return g.reduce_mean(g.mul(d, d));
}

Value ms_ssim_graph(Graph& g, Value x, Value y, const MsSsimConfig& cfg) {
  const Tensor& tx = x.tensor();
  const int feasible = MsSsimConfig::max_feasible_scales(
      tx.shape[1], tx.shape[0], cfg.window_radius);
  if (feasible < cfg.n_scales) {
    throw InvalidInput(
        "ms_ssim_graph: input supports only " + std::to_string(feasible) +
        " scales, " + std::to_string(cfg.n_scales) + " requested");
  }
  const std::vector<double> weights = renormalized_weights(cfg, cfg.n_scales);
  const double c1 = cfg.k1 * cfg.peak * cfg.k1 * cfg.peak;
  const double c2 = cfg.k2 * cfg.peak * cfg.k2 * cfg.peak;
  const int r = cfg.window_radius;
  const double sg = cfg.window_sigma;

  Value result = g.constant(1.0);
  Value a = x, b = y;
  for (int scale = 0; scale < cfg.n_scales; ++scale) {
    Value mu_a = g.gaussian_blur_2d(a, r, sg);
    Value mu_b = g.gaussian_blur_2d(b, r, sg);
    Value e_a2 = g.gaussian_blur_2d(g.mul(a, a), r, sg);
    Value e_b2 = g.gaussian_blur_2d(g.mul(b, b), r, sg);
    Value e_ab = g.gaussian_blur_2d(g.mul(a, b), r, sg);

    Value va = g.sub(e_a2, g.mul(mu_a, mu_a));
    Value vb = g.sub(e_b2, g.mul(mu_b, mu_b));
    Value cov = g.sub(e_ab, g.mul(mu_a, mu_b));
    Value cs = g.div(g.add(g.mul(g.constant(2.0), cov), g.constant(c2)),
                     g.add(g.add(va, vb), g.constant(c2)));
    Value mcs = g.clamp_min(g.reduce_mean(cs), kMsSsimTermFloor);
    result = g.mul(result, g.pow_const(mcs, weights[static_cast<size_t>(scale)]));

    if (scale == cfg.n_scales - 1) {
      Value lum = g.div(
          g.add(g.mul(g.constant(2.0), g.mul(mu_a, mu_b)), g.constant(c1)),
          g.add(g.add(g.mul(mu_a, mu_a), g.mul(mu_b, mu_b)), g.constant(c1)));
      Value ml = g.clamp_min(g.reduce_mean(lum), kMsSsimTermFloor);
      result =
          g.mul(result, g.pow_const(ml, weights[static_cast<size_t>(scale)]));
    } else {
      a = g.avg_downsample_2x(mu_a);
      b = g.avg_downsample_2x(mu_b);
    }
  }
  return result;
}

}  // namespace hlic
