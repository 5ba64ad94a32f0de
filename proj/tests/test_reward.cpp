#include <cmath>

#include "doctest.h"
#include "hlic/error.hpp"
#include "hlic/reward.hpp"
#include "hlic/rng.hpp"

using namespace hlic;

namespace {

RDCurve psnr_curve_with_knot(double bpp, double psnr_val) {
  return RDCurve(MetricKind::kPsnr, "p",
                 {{bpp / 4.0, psnr_val - 6.0}, {bpp, psnr_val},
                  {bpp * 4.0, psnr_val + 6.0}});
}

RDCurve msssim_curve_with_knot(double bpp, double ms) {
  return RDCurve(MetricKind::kMsSsim, "m",
                 {{bpp / 4.0, ms - 0.05}, {bpp, ms}, {bpp * 4.0, ms + 0.02}});
}

EvalStats stats_at(double rate, double psnr_val, double ms) {
  EvalStats s;
  s.bpp_y = 0.9 * rate;
  s.bpp_z = 0.1 * rate;
  s.psnr = psnr_val;
  s.ms_ssim = ms;
  s.gradient_loss = 0.01;
  s.total_variation = 0.03;
  return s;
}

}  // namespace

TEST_CASE("reward is zero at an exact three-way match") {
  RewardConfig cfg = make_preset(RewardPreset::kPsnrPriority, 0.4,
                                 psnr_curve_with_knot(0.4, 33.0),
                                 msssim_curve_with_knot(0.4, 0.95));
  RewardBreakdown b = compute_reward(stats_at(0.4, 33.0, 0.95), cfg);
  CHECK(b.x_rate == 0.0);
  CHECK(b.x_psnr == 0.0);
  CHECK(b.x_msssim == 0.0);
  CHECK(b.total == 0.0);
}

TEST_CASE("msssim_focus preset reproduces the hand-computed example") {
  // x_rate = 0.1 and x_msssim = -0.05 under the negated-penalty convention.
  const double r = 0.44;
  const double f2 = r / 0.95;  // (r - f2)/f2 = -0.05
  RewardConfig cfg = make_preset(RewardPreset::kMsssimFocus, 0.4,
                                 psnr_curve_with_knot(0.5, 33.0),
                                 msssim_curve_with_knot(f2, 0.9));
  RewardBreakdown b = compute_reward(stats_at(r, 33.0, 0.9), cfg);
  CHECK(b.x_rate == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(b.x_msssim == doctest::Approx(-0.05).epsilon(1e-12));
  CHECK(b.term_rate == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(b.term_psnr == 0.0);
  CHECK(b.term_msssim == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(b.total == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("psnr_priority preset reproduces the hand-computed example") {
  // x = (0.1, 0.02, -0.3) -> total = -(25*0.01 + 100*0.0004 + 1*0.09) = -0.38
  const double r = 0.44;
  const double f1 = r / 1.02;
  const double f2 = r / 0.7;
  RewardConfig cfg = make_preset(RewardPreset::kPsnrPriority, 0.4,
                                 psnr_curve_with_knot(f1, 31.0),
                                 msssim_curve_with_knot(f2, 0.93));
  RewardBreakdown b = compute_reward(stats_at(r, 31.0, 0.93), cfg);
  CHECK(b.x_rate == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(b.x_psnr == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(b.x_msssim == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK(b.total == doctest::Approx(-0.38).epsilon(1e-12));
}

TEST_CASE("preset weight tables") {
  RDCurve pc = psnr_curve_with_knot(0.4, 33.0);
  RDCurve mc = msssim_curve_with_knot(0.4, 0.95);

  RewardConfig f = make_preset(RewardPreset::kMsssimFocus, 0.4, pc, mc);
  CHECK(f.rate.kind == ShapingKind::kQuadratic);
  CHECK(f.rate.weight == 25.0);
  CHECK(f.psnr.weight == 0.0);
  CHECK(f.msssim.kind == ShapingKind::kLinear);
  CHECK(f.msssim.weight == 10.0);

  RewardConfig p = make_preset(RewardPreset::kPsnrPriority, 0.4, pc, mc);
  CHECK(p.rate.weight == 25.0);
  CHECK(p.psnr.weight == 100.0);
  CHECK(p.msssim.weight == 1.0);
  for (auto* t : {&p.rate, &p.psnr, &p.msssim}) {
    CHECK(t->kind == ShapingKind::kQuadratic);
  }

  RewardConfig m = make_preset(RewardPreset::kMsssimPriority, 0.4, pc, mc);
  CHECK(m.rate.weight == 25.0);
  CHECK(m.psnr.weight == 1.0);
  CHECK(m.msssim.weight == 100.0);

  CHECK(reward_preset_from_name("msssim_focus") ==
        RewardPreset::kMsssimFocus);
  CHECK_THROWS_AS(reward_preset_from_name("vmaf_focus"), InvalidInput);
}

TEST_CASE("all-quadratic rewards are non-positive with max at zero") {
  Rng rng(31);
  RDCurve pc = psnr_curve_with_knot(0.4, 33.0);
  RDCurve mc = msssim_curve_with_knot(0.4, 0.95);
  for (auto preset :
       {RewardPreset::kPsnrPriority, RewardPreset::kMsssimPriority}) {
    RewardConfig cfg = make_preset(preset, 0.4, pc, mc);
    for (int i = 0; i < 200; ++i) {
      EvalStats s = stats_at(rng.uniform(0.05, 1.5), rng.uniform(26.0, 40.0),
                             rng.uniform(0.88, 0.999));
      RewardBreakdown b = compute_reward(s, cfg);
      CHECK(b.total <= 0.0);
      const bool all_zero =
          b.x_rate == 0.0 && b.x_psnr == 0.0 && b.x_msssim == 0.0;
      if (b.total == 0.0) CHECK(all_zero);
    }
  }
}

TEST_CASE("shaped term properties") {
  SUBCASE("quadratic rate term is maximized at zero deviation") {
    TermShaping rate{ShapingKind::kQuadratic, 25.0};
    const double at_zero = -shaped_term(rate, 0.0);
    for (double x : {-0.5, -0.1, -1e-3, 1e-3, 0.2, 0.9}) {
      CHECK(-shaped_term(rate, x) < at_zero);
    }
  }
  SUBCASE("linear msssim term makes the total strictly decreasing in x") {
    TermShaping lin{ShapingKind::kLinear, 10.0};
    double last = 1e18;
    for (double x : {-0.4, -0.1, 0.0, 0.3, 0.8}) {
      const double total = -shaped_term(lin, x);
      CHECK(total < last);
      last = total;
    }
  }
}

TEST_CASE("scale consistency under joint rescaling") {
  Rng rng(77);
  for (int i = 0; i < 100; ++i) {
    const double scale = std::exp(rng.uniform(-2.0, 2.0));
    const double rate = rng.uniform(0.1, 0.9);
    EvalStats s = stats_at(rate, rng.uniform(28.0, 38.0),
                           rng.uniform(0.9, 0.995));
    RDCurve pc = psnr_curve_with_knot(rng.uniform(0.2, 0.6), 33.0);
    RDCurve mc = msssim_curve_with_knot(rng.uniform(0.2, 0.6), 0.95);
    RewardConfig cfg = make_preset(RewardPreset::kMsssimPriority,
                                   rng.uniform(0.2, 0.6), pc, mc);

    auto scale_curve = [&](const RDCurve& c) {
      std::vector<RDPoint> pts = c.points();
      for (RDPoint& p : pts) p.bpp *= scale;
      return RDCurve(c.kind(), c.label(), pts);
    };
    RewardConfig scaled = cfg;
    scaled.r_target = cfg.r_target * scale;
    scaled.psnr_curve = scale_curve(cfg.psnr_curve);
    scaled.msssim_curve = scale_curve(cfg.msssim_curve);
    EvalStats s2 = s;
    s2.bpp_y *= scale;
    s2.bpp_z *= scale;

    RewardBreakdown a = compute_reward(s, cfg);
    RewardBreakdown b = compute_reward(s2, scaled);
    CHECK(b.x_rate == doctest::Approx(a.x_rate).epsilon(1e-12));
    CHECK(b.x_psnr == doctest::Approx(a.x_psnr).epsilon(1e-12));
    CHECK(b.x_msssim == doctest::Approx(a.x_msssim).epsilon(1e-12));
    CHECK(b.total == doctest::Approx(a.total).epsilon(1e-12));
  }
}

TEST_CASE("config validation") {
  RDCurve pc = psnr_curve_with_knot(0.4, 33.0);
  RDCurve mc = msssim_curve_with_knot(0.4, 0.95);
  RewardConfig cfg = make_preset(RewardPreset::kMsssimFocus, 0.4, pc, mc);
  cfg.r_target = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg.r_target = 0.4;
  std::swap(cfg.psnr_curve, cfg.msssim_curve);
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}
