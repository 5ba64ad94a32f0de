#include "hlic/toy_codec.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "hlic/error.hpp"
#include "hlic/rng.hpp"
#include "serialize_util.hpp"

namespace hlic {

namespace {

constexpr double kLog2E = 1.4426950408889634074;

// Orthonormal 2-D DCT-II basis vectors for an NxN block, in zigzag
// (low-frequency-first) order. Column c of the result is basis function c
// flattened row-major; the matrix satisfies B^T B = I.
Tensor dct_basis(int n, int channels) {
  std::vector<std::pair<int, int>> order;
  for (int s = 0; s <= 2 * (n - 1); ++s) {
    for (int u = 0; u <= s; ++u) {
      const int v = s - u;
      if (u < n && v < n) order.push_back({u, v});
    }
  }
  Tensor b = Tensor::zeros({n * n, channels});
  const double pi = 3.14159265358979323846;
  for (int c = 0; c < channels; ++c) {
    const auto [u, v] = order[static_cast<size_t>(c)];
    const double au = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    const double av = v == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        b.at(i * n + j, c) = au * av * std::cos((2 * i + 1) * u * pi / (2 * n)) *
                             std::cos((2 * j + 1) * v * pi / (2 * n));
      }
    }
  }
  return b;
}

// Plain row-major matmul for the evaluation path.
std::vector<double> matmul_plain(const std::vector<double>& a, int m, int k,
                                 const std::vector<double>& b, int p) {
  std::vector<double> c(static_cast<size_t>(m) * p, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < k; ++l) {
      const double av = a[static_cast<size_t>(i) * k + l];
      if (av == 0.0) continue;
      const double* brow = b.data() + static_cast<size_t>(l) * p;
      double* crow = c.data() + static_cast<size_t>(i) * p;
      for (int j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

}  // namespace

void ToyCodecConfig::validate() const {
  if (block < 2) throw InvalidInput("toy codec: block must be >= 2");
  if (crop < block || crop % block != 0) {
    throw InvalidInput("toy codec: crop must be a positive multiple of block");
  }
  if (latent_channels < 1 || latent_channels > block * block) {
    throw InvalidInput("toy codec: latent_channels must be in [1, block^2]");
  }
  if (steps_per_epoch < 0 || batch < 1) {
    throw InvalidInput("toy codec: steps_per_epoch >= 0 and batch >= 1");
  }
  if (!(lr > 0.0) || !(sigma_init > 0.0) || !(transform_scale > 0.0)) {
    throw InvalidInput("toy codec: lr, sigma_init, transform_scale must be "
                       "positive");
  }
}

ToyCodecTrainee::ToyCodecTrainee(ToyCodecConfig cfg,
                                 std::vector<Image> train_images,
                                 std::vector<Image> val_images)
    : cfg_(cfg) {
  cfg_.validate();
  if (train_images.empty() || val_images.empty()) {
    throw InvalidInput("toy codec: training and validation sets must be "
                       "non-empty");
  }
  for (const auto* set : {&train_images, &val_images}) {
    for (const Image& img : *set) {
      if (img.width < cfg_.crop || img.height < cfg_.crop) {
        throw InvalidInput(
            "toy codec: image " + std::to_string(img.width) + "x" +
            std::to_string(img.height) + " smaller than the " +
            std::to_string(cfg_.crop) + "-pixel crop");
      }
    }
  }
  train_ = std::make_shared<const std::vector<Image>>(std::move(train_images));
  val_ = std::make_shared<const std::vector<Image>>(std::move(val_images));

  MsSsimConfig base;
  const int feasible =
      MsSsimConfig::max_feasible_scales(cfg_.crop, cfg_.crop, base.window_radius);
  if (feasible < 1) {
    throw InvalidInput("toy codec: crop too small for ms-ssim");
  }
  msssim_cfg_ = base.reduced_to(std::min(feasible, base.n_scales));

  const int d = cfg_.block * cfg_.block;
  Tensor basis = dct_basis(cfg_.block, cfg_.latent_channels);
  analysis_ = Tensor::zeros({d, cfg_.latent_channels});
  synthesis_ = Tensor::zeros({cfg_.latent_channels, d});
  for (int i = 0; i < d; ++i) {
    for (int c = 0; c < cfg_.latent_channels; ++c) {
      analysis_.at(i, c) = basis.at(i, c) * cfg_.transform_scale;
      synthesis_.at(c, i) = basis.at(i, c) / cfg_.transform_scale;
    }
  }

  // Match the prior scales to the empirical per-channel latent spread at
  // init; desk-scale step budgets cannot migrate log_sigma across decades.
  std::vector<double> mean(static_cast<size_t>(cfg_.latent_channels), 0.0);
  std::vector<double> sq(static_cast<size_t>(cfg_.latent_channels), 0.0);
  int64_t n_blocks = 0;
  for (const Image& img : *train_) {
    Tensor blocks = tile_blocks(center_crop(img), cfg_.block);
    for (int i = 0; i < blocks.shape[0]; ++i) {
      for (int c = 0; c < cfg_.latent_channels; ++c) {
        double y = 0.0;
        for (int k = 0; k < d; ++k) {
          y += blocks.at(i, k) * analysis_.at(k, c);
        }
        mean[static_cast<size_t>(c)] += y;
        sq[static_cast<size_t>(c)] += y * y;
      }
    }
    n_blocks += blocks.shape[0];
    if (n_blocks >= 2048) break;
  }
  log_sigma_ = Tensor::zeros({1, cfg_.latent_channels});
  for (int c = 0; c < cfg_.latent_channels; ++c) {
    const double mu = mean[static_cast<size_t>(c)] / static_cast<double>(n_blocks);
    const double var =
        sq[static_cast<size_t>(c)] / static_cast<double>(n_blocks) - mu * mu;
    const double sd = std::sqrt(std::max(var, 0.0));
    log_sigma_.data[static_cast<size_t>(c)] =
        std::log(std::max(sd, cfg_.sigma_init));
  }

  analysis_.requires_grad = true;
  synthesis_.requires_grad = true;
  log_sigma_.requires_grad = true;
  rebuild_optimizer();
}

ToyCodecTrainee::ToyCodecTrainee(const ToyCodecTrainee& other)
    : cfg_(other.cfg_),
      msssim_cfg_(other.msssim_cfg_),
      analysis_(other.analysis_),
      synthesis_(other.synthesis_),
      log_sigma_(other.log_sigma_),
      train_(other.train_),
      val_(other.val_),
      eval_cached_(other.eval_cached_),
      eval_cache_(other.eval_cache_) {
  rebuild_optimizer();
  for (size_t i = 0; i < opt_->slots().size(); ++i) {
    opt_->slots()[i].m = other.opt_->slots()[i].m;
    opt_->slots()[i].v = other.opt_->slots()[i].v;
  }
  opt_->set_step_count(other.opt_->step_count());
}

void ToyCodecTrainee::rebuild_optimizer() {
  AdamConfig adam;
  adam.lr = cfg_.lr;
  opt_ = std::make_unique<AdamOptimizer>(adam);
  opt_->add_param("analysis", &analysis_);
  opt_->add_param("synthesis", &synthesis_);
  opt_->add_param("log_sigma", &log_sigma_);
}

Tensor ToyCodecTrainee::tile_blocks(const Image& crop, int block) {
  if (crop.width % block != 0 || crop.height % block != 0) {
    throw InvalidInput("toy codec: crop not divisible into blocks");
  }
  const int gw = crop.width / block, gh = crop.height / block;
  Tensor t = Tensor::zeros({gh * gw, block * block});
  for (int g = 0; g < gh * gw; ++g) {
    const int gy = g / gw, gx = g % gw;
    for (int i = 0; i < block; ++i) {
      for (int j = 0; j < block; ++j) {
        t.at(g, i * block + j) = crop.at(gy * block + i, gx * block + j);
      }
    }
  }
  return t;
}

Value ToyCodecTrainee::training_loss_graph(Graph& g,
                                           const std::vector<Image>& crops,
                                           const LambdaWeights& lambda,
                                           Rng& noise_rng) {
  if (crops.empty()) {
    throw InvalidInput("toy codec: empty crop batch");
  }
  Value analysis = g.leaf(analysis_);
  Value synthesis = g.leaf(synthesis_);
  Value sigma = g.exp(g.leaf(log_sigma_));
  Value zero = g.constant(0.0);

  Value rate_total = g.constant(0.0);
  Value mse_sum = g.constant(0.0);
  Value msssim_sum = g.constant(0.0);
  int64_t n_pixels = 0;

  for (const Image& crop : crops) {
    const int gh = crop.height / cfg_.block, gw = crop.width / cfg_.block;
    n_pixels += static_cast<int64_t>(crop.width) * crop.height;

    Value blocks = g.constant(tile_blocks(crop, cfg_.block));
    Value latents = g.matmul(blocks, analysis);
    Value noisy = g.add_uniform_noise(latents, noise_rng);
    rate_total = g.add(rate_total, rate_bits_graph(g, noisy, zero, sigma));

    Value recon_blocks = g.matmul(noisy, synthesis);
    Value recon =
        g.untile_blocks(recon_blocks, cfg_.block, cfg_.block, gh, gw);
    Value original = g.constant(crop.to_tensor());
    mse_sum = g.add(mse_sum, mse_graph(g, original, recon));

    const int feasible = MsSsimConfig::max_feasible_scales(
        crop.width, crop.height, msssim_cfg_.window_radius);
    if (feasible >= 1) {
      MsSsimConfig cfg = msssim_cfg_;
      if (feasible < cfg.n_scales) cfg = cfg.reduced_to(feasible);
      msssim_sum = g.add(msssim_sum, ms_ssim_graph(g, original, recon, cfg));
    } else {
      msssim_sum = g.add(msssim_sum, g.constant(1.0));
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(crops.size());
  Value mse_mean = g.mul(g.constant(inv_batch), mse_sum);
  Value msssim_mean = g.mul(g.constant(inv_batch), msssim_sum);
  return rd_loss_graph(g, rate_total, n_pixels, mse_mean, msssim_mean, lambda);
}

std::vector<double> ToyCodecTrainee::train_epoch(const LambdaWeights& lambda,
                                                 Rng& rng) {
  std::vector<double> losses;
  losses.reserve(static_cast<size_t>(cfg_.steps_per_epoch));
  for (int step = 0; step < cfg_.steps_per_epoch; ++step) {
    std::vector<Image> crops;
    crops.reserve(static_cast<size_t>(cfg_.batch));
    for (int b = 0; b < cfg_.batch; ++b) {
      const Image& src =
          (*train_)[static_cast<size_t>(rng.below(train_->size()))];
      const int y0 = static_cast<int>(
          rng.below(static_cast<uint64_t>(src.height - cfg_.crop + 1)));
      const int x0 = static_cast<int>(
          rng.below(static_cast<uint64_t>(src.width - cfg_.crop + 1)));
      Image crop = Image::zeros(cfg_.crop, cfg_.crop);
      for (int y = 0; y < cfg_.crop; ++y) {
        for (int x = 0; x < cfg_.crop; ++x) {
          crop.at(y, x) = src.at(y0 + y, x0 + x);
        }
      }
      crops.push_back(std::move(crop));
    }

    Graph g;
    Value loss = training_loss_graph(g, crops, lambda, rng);
    const double loss_value = loss.scalar();
    if (!std::isfinite(loss_value)) {
      throw NumericError("toy codec: non-finite training loss at step " +
                         std::to_string(opt_->step_count()));
    }
    opt_->zero_grad();
    g.backward(loss);
    opt_->step();
    losses.push_back(loss_value);
  }
  if (cfg_.steps_per_epoch > 0) eval_cached_ = false;
  return losses;
}

Image ToyCodecTrainee::center_crop(const Image& img) const {
  const int y0 = (img.height - cfg_.crop) / 2;
  const int x0 = (img.width - cfg_.crop) / 2;
  Image crop = Image::zeros(cfg_.crop, cfg_.crop, img.peak);
  for (int y = 0; y < cfg_.crop; ++y) {
    for (int x = 0; x < cfg_.crop; ++x) crop.at(y, x) = img.at(y0 + y, x0 + x);
  }
  return crop;
}

EvalStats ToyCodecTrainee::evaluate() const {
  if (eval_cached_) return eval_cache_;
  const int d = cfg_.block * cfg_.block;
  const int c = cfg_.latent_channels;
  double bits_total = 0.0;
  double psnr_sum = 0.0, msssim_sum = 0.0, gl_sum = 0.0, tv_sum = 0.0;
  int64_t pixel_total = 0;

  for (const Image& img : *val_) {
    Image crop = center_crop(img);
    Tensor blocks = tile_blocks(crop, cfg_.block);
    const int n_blocks = blocks.shape[0];
    std::vector<double> latents =
        matmul_plain(blocks.data, n_blocks, d, analysis_.data, c);

    // Hard rounding for evaluation; bits from the per-channel prior.
    for (int i = 0; i < n_blocks; ++i) {
      for (int j = 0; j < c; ++j) {
        double& y = latents[static_cast<size_t>(i) * c + j];
        y = std::round(y);
        const double sigma =
            std::exp(log_sigma_.data[static_cast<size_t>(j)]);
        bits_total += rate_bits_from_likelihood(
            gaussian_uniform_likelihood(y, 0.0, sigma));
      }
    }

    std::vector<double> recon_blocks =
        matmul_plain(latents, n_blocks, c, synthesis_.data, d);
    Image recon = Image::zeros(cfg_.crop, cfg_.crop, crop.peak);
    const int gw = cfg_.crop / cfg_.block;
    for (int g = 0; g < n_blocks; ++g) {
      const int gy = g / gw, gx = g % gw;
      for (int i = 0; i < cfg_.block; ++i) {
        for (int j = 0; j < cfg_.block; ++j) {
          double v = recon_blocks[static_cast<size_t>(g) * d + i * cfg_.block + j];
          if (v < 0.0) v = 0.0;
          if (v > crop.peak) v = crop.peak;
          recon.at(gy * cfg_.block + i, gx * cfg_.block + j) = v;
        }
      }
    }

    pixel_total += static_cast<int64_t>(cfg_.crop) * cfg_.crop;
    psnr_sum += psnr(crop, recon);
    msssim_sum += ms_ssim(crop, recon, msssim_cfg_);
    gl_sum += gradient_loss(crop, recon);
    tv_sum += total_variation(recon);
  }

  const double n = static_cast<double>(val_->size());
  EvalStats s;
  s.psnr = psnr_sum / n;
  s.ms_ssim = msssim_sum / n;
  s.bpp_y = bits_total / static_cast<double>(pixel_total);
  s.bpp_z = 0.0;  // no hyperprior in the toy transform
  s.gradient_loss = gl_sum / n;
  s.total_variation = tv_sum / n;
  eval_cache_ = s;
  eval_cached_ = true;
  return s;
}

std::unique_ptr<Trainee> ToyCodecTrainee::clone() const {
  return std::make_unique<ToyCodecTrainee>(*this);
}

void ToyCodecTrainee::copy_state_from(const Trainee& other) {
  const auto* src = dynamic_cast<const ToyCodecTrainee*>(&other);
  if (src == nullptr) {
    throw InvalidInput("toy codec: cannot copy state from a different "
                       "trainee kind");
  }
  analysis_.data = src->analysis_.data;
  synthesis_.data = src->synthesis_.data;
  log_sigma_.data = src->log_sigma_.data;
  for (size_t i = 0; i < opt_->slots().size(); ++i) {
    opt_->slots()[i].m = src->opt_->slots()[i].m;
    opt_->slots()[i].v = src->opt_->slots()[i].v;
  }
  opt_->set_step_count(src->opt_->step_count());
  eval_cached_ = src->eval_cached_;
  eval_cache_ = src->eval_cache_;
}

void ToyCodecTrainee::set_transforms(Tensor analysis, Tensor synthesis,
                                     Tensor log_sigma) {
  if (analysis.shape != analysis_.shape ||
      synthesis.shape != synthesis_.shape ||
      log_sigma.shape != log_sigma_.shape) {
    throw InvalidInput("toy codec: set_transforms shape mismatch");
  }
  analysis_.data = std::move(analysis.data);
  synthesis_.data = std::move(synthesis.data);
  log_sigma_.data = std::move(log_sigma.data);
  eval_cached_ = false;
}

void ToyCodecTrainee::save_state(std::ostream& os) const {
  os << "hlic_toy_codec v1\n";
  os << "channels " << cfg_.latent_channels << " block " << cfg_.block << "\n";
  detail::write_tensor(os, "analysis", analysis_);
  detail::write_tensor(os, "synthesis", synthesis_);
  detail::write_tensor(os, "log_sigma", log_sigma_);
  detail::write_adam(os, *opt_);
}

void ToyCodecTrainee::load_state(std::istream& is) {
  std::string magic, version, key;
  is >> magic >> version;
  if (!is || magic != "hlic_toy_codec" || version != "v1") {
    throw InvalidInput("toy codec state: bad header");
  }
  int channels = 0, block = 0;
  std::string key2;
  is >> key >> channels >> key2 >> block;
  if (!is || key != "channels" || key2 != "block" ||
      channels != cfg_.latent_channels || block != cfg_.block) {
    throw InvalidInput("toy codec state: geometry mismatch");
  }
  detail::read_tensor(is, "analysis", analysis_);
  detail::read_tensor(is, "synthesis", synthesis_);
  detail::read_tensor(is, "log_sigma", log_sigma_);
  detail::read_adam(is, *opt_);
  eval_cached_ = false;
}

}  // namespace hlic
