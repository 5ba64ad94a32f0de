#include "hlic/surrogate.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "hlic/error.hpp"
#include "hlic/metrics.hpp"
#include "hlic/rng.hpp"
#include "hlic/textio.hpp"

namespace hlic {

namespace {

// evaluate() observation constants.
constexpr double kTv0 = 0.02;
constexpr double kTv1 = 0.5;
constexpr double kGl0 = 0.005;
constexpr double kGl1 = 0.05;
constexpr double kPsnrCap = 100.0;

constexpr double kMinRate = 1e-4;
constexpr double kMinMsSsim = 1e-6;

}  // namespace

void SurrogateConfig::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw InvalidInput("surrogate: eta must be in (0, 1]");
  }
  if (!(c1 > 0.0) || !(kappa > 0.0)) {
    throw InvalidInput("surrogate: c1 and kappa must be positive");
  }
  if (!(w_ref > 0.0) || !(r_ref > 0.0)) {
    throw InvalidInput("surrogate: anchors must be positive");
  }
  if (noise_sigma < 0.0) {
    throw InvalidInput("surrogate: noise_sigma must be >= 0");
  }
  if (psnr_curve.kind() != MetricKind::kPsnr ||
      msssim_curve.kind() != MetricKind::kMsSsim) {
    throw InvalidInput("surrogate: curve metric kinds must be psnr/ms_ssim");
  }
}

RDCurve default_surrogate_psnr_curve() {
  std::vector<RDPoint> pts;
  for (int k = 0; k < 8; ++k) {
    const double bpp = 0.05 * std::pow(20.0, k / 7.0);
    pts.push_back({bpp, 28.0 + 2.5 * std::log2(bpp / 0.05)});
  }
  return RDCurve(MetricKind::kPsnr, "synthetic psnr baseline", pts);
}

RDCurve default_surrogate_msssim_curve() {
  std::vector<RDPoint> pts;
  for (int k = 0; k < 8; ++k) {
    const double bpp = 0.05 * std::pow(20.0, k / 7.0);
    pts.push_back({bpp, 0.88 + 0.024 * std::log2(bpp / 0.05)});
  }
  return RDCurve(MetricKind::kMsSsim, "synthetic ms_ssim baseline", pts);
}

SurrogateConfig default_surrogate_config() {
  SurrogateConfig cfg;
  cfg.psnr_curve = default_surrogate_psnr_curve();
  cfg.msssim_curve = default_surrogate_msssim_curve();
  return cfg;
}

SurrogateEquilibrium surrogate_equilibrium(const LambdaWeights& lambda,
                                           const SurrogateConfig& cfg) {
  cfg.validate();
  const double w_mse = lambda.mse_weight();
  const double w_ms = lambda.msssim_weight();
  const double w_eff = w_mse + cfg.kappa * w_ms;
  const double alpha = w_mse / w_eff;

  double r = cfg.r_ref + cfg.c1 * std::log(w_eff / cfg.w_ref);
  const double lo =
      std::max(cfg.psnr_curve.min_bpp(), cfg.msssim_curve.min_bpp());
  const double hi =
      std::min(cfg.psnr_curve.max_bpp(), cfg.msssim_curve.max_bpp());
  if (r < lo) r = lo;
  if (r > hi) r = hi;

  SurrogateEquilibrium eq;
  eq.r = r;
  eq.alpha = alpha;
  eq.p = cfg.psnr_curve.bpp_to_metric(r).metric - cfg.d_psnr * (1.0 - alpha);
  eq.m = cfg.msssim_curve.bpp_to_metric(r).metric - cfg.d_msssim * alpha;
  return eq;
}

SurrogateTrainee::SurrogateTrainee(SurrogateConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  // Start on the baseline curves at the anchor rate.
  state_.r = cfg_.r_ref;
  state_.p = cfg_.psnr_curve.bpp_to_metric(cfg_.r_ref).metric;
  state_.m = cfg_.msssim_curve.bpp_to_metric(cfg_.r_ref).metric;
}

std::vector<double> SurrogateTrainee::train_epoch(const LambdaWeights& lambda,
                                                  Rng& rng) {
  const SurrogateEquilibrium eq = surrogate_equilibrium(lambda, cfg_);
  state_.r += cfg_.eta * (eq.r - state_.r) + cfg_.noise_sigma * rng.normal();
  state_.p += cfg_.eta * (eq.p - state_.p) + cfg_.noise_sigma * rng.normal();
  state_.m += cfg_.eta * (eq.m - state_.m) + cfg_.noise_sigma * rng.normal();
  if (state_.r < kMinRate) state_.r = kMinRate;
  if (state_.m > 1.0) state_.m = 1.0;
  if (state_.m < kMinMsSsim) state_.m = kMinMsSsim;
  return {};
}

EvalStats SurrogateTrainee::evaluate() const {
  EvalStats s;
  s.psnr = state_.p;
  s.ms_ssim = state_.m;
  s.bpp_y = 0.9 * state_.r;
  s.bpp_z = state_.r - s.bpp_y;  // sums back to r exactly
  s.total_variation = kTv0 + kTv1 * (1.0 - state_.m);
  s.gradient_loss = kGl0 + kGl1 * (kPsnrCap - state_.p) / kPsnrCap;
  return s;
}

std::unique_ptr<Trainee> SurrogateTrainee::clone() const {
  return std::make_unique<SurrogateTrainee>(*this);
}

void SurrogateTrainee::copy_state_from(const Trainee& other) {
  const auto* src = dynamic_cast<const SurrogateTrainee*>(&other);
  if (src == nullptr) {
    throw InvalidInput("surrogate: cannot copy state from a different "
                       "trainee kind");
  }
  state_ = src->state_;
}

void SurrogateTrainee::save_state(std::ostream& os) const {
  os << "hlic_surrogate v1\n";
  os << format_double(state_.r) << " " << format_double(state_.p) << " "
     << format_double(state_.m) << "\n";
}

void SurrogateTrainee::load_state(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  if (!is || magic != "hlic_surrogate" || version != "v1") {
    throw InvalidInput("surrogate state: bad header");
  }
  SurrogateState s;
  is >> s.r >> s.p >> s.m;
  if (!is) throw InvalidInput("surrogate state: truncated");
  state_ = s;
}

}  // namespace hlic
