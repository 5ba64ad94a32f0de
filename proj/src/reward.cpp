#include "hlic/reward.hpp"

#include <cmath>

#include "hlic/error.hpp"

namespace hlic {

ShapingKind shaping_kind_from_name(const std::string& name) {
  if (name == "quadratic") return ShapingKind::kQuadratic;
  if (name == "linear") return ShapingKind::kLinear;
  throw InvalidInput("reward: unknown shaping kind '" + name + "'");
}

const char* shaping_kind_name(ShapingKind kind) {
  return kind == ShapingKind::kQuadratic ? "quadratic" : "linear";
}

double shaped_term(const TermShaping& shaping, double x) {
  return shaping.kind == ShapingKind::kQuadratic ? shaping.weight * x * x
                                                 : shaping.weight * x;
}

void RewardConfig::validate() const {
  if (!(r_target > 0.0)) {
    throw InvalidInput("reward: r_target must be positive");
  }
  for (const TermShaping* t : {&rate, &psnr, &msssim}) {
    if (t->weight < 0.0 || !std::isfinite(t->weight)) {
      throw InvalidInput("reward: term weights must be finite and >= 0");
    }
  }
  if (psnr_curve.kind() != MetricKind::kPsnr) {
    throw InvalidInput("reward: psnr_curve has metric kind ms_ssim");
  }
  if (msssim_curve.kind() != MetricKind::kMsSsim) {
    throw InvalidInput("reward: msssim_curve has metric kind psnr");
  }
}

RewardBreakdown compute_reward(const EvalStats& stats,
                               const RewardConfig& cfg) {
  stats.validate();
  cfg.validate();
  const double r = stats.rate();

  RewardBreakdown out;
  out.x_rate = (r - cfg.r_target) / cfg.r_target;
  const double f1 = cfg.psnr_curve.metric_to_bpp(stats.psnr).bpp;
  out.x_psnr = (r - f1) / f1;
  const double f2 = cfg.msssim_curve.metric_to_bpp(stats.ms_ssim).bpp;
  out.x_msssim = (r - f2) / f2;

  out.term_rate = shaped_term(cfg.rate, out.x_rate);
  out.term_psnr = shaped_term(cfg.psnr, out.x_psnr);
  out.term_msssim = shaped_term(cfg.msssim, out.x_msssim);
  out.total = -(out.term_rate + out.term_psnr + out.term_msssim);
  return out;
}

RewardPreset reward_preset_from_name(const std::string& name) {
  if (name == "msssim_focus") return RewardPreset::kMsssimFocus;
  if (name == "psnr_priority") return RewardPreset::kPsnrPriority;
  if (name == "msssim_priority") return RewardPreset::kMsssimPriority;
  throw InvalidInput("reward: unknown preset '" + name + "'");
}

const char* reward_preset_name(RewardPreset preset) {
  switch (preset) {
    case RewardPreset::kMsssimFocus: return "msssim_focus";
    case RewardPreset::kPsnrPriority: return "psnr_priority";
    case RewardPreset::kMsssimPriority: return "msssim_priority";
  }
  return "?";
}

RewardConfig make_preset(RewardPreset preset, double r_target,
                         RDCurve psnr_curve, RDCurve msssim_curve) {
  RewardConfig cfg;
  cfg.r_target = r_target;
  cfg.psnr_curve = std::move(psnr_curve);
  cfg.msssim_curve = std::move(msssim_curve);
  switch (preset) {
    case RewardPreset::kMsssimFocus:
      cfg.rate = {ShapingKind::kQuadratic, 25.0};
      cfg.psnr = {ShapingKind::kQuadratic, 0.0};
      cfg.msssim = {ShapingKind::kLinear, 10.0};
      break;
    case RewardPreset::kPsnrPriority:
      cfg.rate = {ShapingKind::kQuadratic, 25.0};
      cfg.psnr = {ShapingKind::kQuadratic, 100.0};
      cfg.msssim = {ShapingKind::kQuadratic, 1.0};
      break;
    case RewardPreset::kMsssimPriority:
      cfg.rate = {ShapingKind::kQuadratic, 25.0};
      cfg.psnr = {ShapingKind::kQuadratic, 1.0};
      cfg.msssim = {ShapingKind::kQuadratic, 100.0};
      break;
  }
  cfg.validate();
  return cfg;
}

}  // namespace hlic
