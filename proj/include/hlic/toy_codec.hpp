#pragma once

#include <memory>
#include <vector>

#include "hlic/codec.hpp"
#include "hlic/metrics.hpp"

namespace hlic {

// Linear 8x8 block-transform codec with a zero-mean factorized Gaussian
// prior on the latents. The smallest trainee for which the inner RD
// minimization is a genuine learning problem.
struct ToyCodecConfig {
  int latent_channels = 32;  // C
  int block = 8;
  int crop = 96;             // training crop and evaluation center-crop
  int steps_per_epoch = 50;
  int batch = 16;
  double lr = 1e-4;
  double sigma_init = 0.5;           // floor on the initial per-channel scale
  double transform_scale = 0.015625;  // initial analysis gain (1/64)

  void validate() const;
};

class ToyCodecTrainee : public Trainee {
 public:
  ToyCodecTrainee(ToyCodecConfig cfg, std::vector<Image> train_images,
                  std::vector<Image> val_images);

  ToyCodecTrainee(const ToyCodecTrainee& other);
  ToyCodecTrainee& operator=(const ToyCodecTrainee&) = delete;

  std::vector<double> train_epoch(const LambdaWeights& lambda,
                                  Rng& rng) override;
  EvalStats evaluate() const override;

  std::unique_ptr<Trainee> clone() const override;
  void copy_state_from(const Trainee& other) override;
  void save_state(std::ostream& os) const override;
  void load_state(std::istream& is) override;

  // One training-step loss graph over the given crops (each crop x crop
  // pixels). Exposed so gradient checks exercise the exact training path.
  Value training_loss_graph(Graph& g, const std::vector<Image>& crops,
                            const LambdaWeights& lambda, Rng& noise_rng);

  // Flattens a crop into a [n_blocks, block*block] row-per-block tensor.
  static Tensor tile_blocks(const Image& crop, int block);

  const Tensor& analysis() const { return analysis_; }
  const Tensor& synthesis() const { return synthesis_; }
  const Tensor& log_sigma() const { return log_sigma_; }
  void set_transforms(Tensor analysis, Tensor synthesis, Tensor log_sigma);
  int64_t step_count() const { return opt_->step_count(); }
  const ToyCodecConfig& config() const { return cfg_; }

 private:
  void rebuild_optimizer();
  Image center_crop(const Image& img) const;

  ToyCodecConfig cfg_;
  MsSsimConfig msssim_cfg_;  // reduced to the crop's feasible scale count
  Tensor analysis_;          // [block^2, C]
  Tensor synthesis_;         // [C, block^2]
  Tensor log_sigma_;         // [1, C]
  std::unique_ptr<AdamOptimizer> opt_;
  std::shared_ptr<const std::vector<Image>> train_;
  std::shared_ptr<const std::vector<Image>> val_;
  mutable bool eval_cached_ = false;
  mutable EvalStats eval_cache_;
};

}  // namespace hlic
