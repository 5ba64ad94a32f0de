#pragma once

#include "hlic/codec.hpp"
#include "hlic/rdcurve.hpp"

namespace hlic {

// Analytic trainee: its equilibrium rate responds logarithmically to the
// effective distortion weight, and the PSNR/MS-SSIM split is controlled by
// the MSE share of that weight.
struct SurrogateConfig {
  double r_ref = 0.3;      // bpp anchor
  double w_ref = 0.0256;   // effective-weight anchor
  double c1 = 0.15;        // bpp per ln(weight)
  double kappa = 0.0128 / 120.0;  // MSE <-> MS-SSIM weight scale
  double d_psnr = 2.0;     // dB penalty amplitude at alpha = 0
  double d_msssim = 0.03;  // MS-SSIM penalty amplitude at alpha = 1
  double eta = 0.25;       // relaxation rate per epoch, in (0, 1]
  double noise_sigma = 0.0;
  RDCurve psnr_curve;
  RDCurve msssim_curve;

  void validate() const;
};

// Bundled synthetic baselines: log-linear in bpp, 8 knots spanning
// 0.05 to 1.0 bpp.
RDCurve default_surrogate_psnr_curve();
RDCurve default_surrogate_msssim_curve();
SurrogateConfig default_surrogate_config();

struct SurrogateState {
  double r = 0.0;  // bpp
  double p = 0.0;  // psnr dB
  double m = 0.0;  // ms-ssim

  bool operator==(const SurrogateState&) const = default;
};

struct SurrogateEquilibrium {
  double r = 0.0;
  double p = 0.0;
  double m = 0.0;
  double alpha = 0.0;  // MSE share of the effective weight
};

SurrogateEquilibrium surrogate_equilibrium(const LambdaWeights& lambda,
                                           const SurrogateConfig& cfg);

class SurrogateTrainee : public Trainee {
 public:
  explicit SurrogateTrainee(SurrogateConfig cfg);

  std::vector<double> train_epoch(const LambdaWeights& lambda,
                                  Rng& rng) override;
  EvalStats evaluate() const override;

  std::unique_ptr<Trainee> clone() const override;
  void copy_state_from(const Trainee& other) override;
  void save_state(std::ostream& os) const override;
  void load_state(std::istream& is) override;

  const SurrogateState& state() const { return state_; }
  void set_state(const SurrogateState& s) { state_ = s; }

 private:
  SurrogateConfig cfg_;
  SurrogateState state_;
};

}  // namespace hlic
