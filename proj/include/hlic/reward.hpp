#pragma once

#include <string>

#include "hlic/codec.hpp"
#include "hlic/rdcurve.hpp"

namespace hlic {

enum class ShapingKind { kQuadratic, kLinear };

ShapingKind shaping_kind_from_name(const std::string& name);
const char* shaping_kind_name(ShapingKind kind);

struct TermShaping {
  ShapingKind kind = ShapingKind::kQuadratic;
  double weight = 0.0;
};

// w * x^2 or w * x.
double shaped_term(const TermShaping& shaping, double x);

struct RewardConfig {
  double r_target = 0.0;
  TermShaping rate;
  TermShaping psnr;
  TermShaping msssim;
  RDCurve psnr_curve;
  RDCurve msssim_curve;

  void validate() const;
};

// The three summands and their total. Terms are penalties; total is their
// negated sum so that larger is better.
struct RewardBreakdown {
  double x_rate = 0.0;
  double x_psnr = 0.0;
  double x_msssim = 0.0;
  double term_rate = 0.0;
  double term_psnr = 0.0;
  double term_msssim = 0.0;
  double total = 0.0;
};

RewardBreakdown compute_reward(const EvalStats& stats,
                               const RewardConfig& cfg);

enum class RewardPreset { kMsssimFocus, kPsnrPriority, kMsssimPriority };

RewardPreset reward_preset_from_name(const std::string& name);
const char* reward_preset_name(RewardPreset preset);

RewardConfig make_preset(RewardPreset preset, double r_target,
                         RDCurve psnr_curve, RDCurve msssim_curve);

}  // namespace hlic
