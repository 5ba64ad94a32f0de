#pragma once

#include <string>
#include <vector>

#include "hlic/harness.hpp"
#include "hlic/surrogate.hpp"
#include "hlic/toy_codec.hpp"

namespace hlic {

struct DatasetSpec {
  enum class Kind { kSynthetic, kFiles };
  Kind kind = Kind::kSynthetic;
  // Synthetic dataset parameters.
  int train_count = 16;
  int val_count = 5;
  int width = 160;
  int height = 160;
  uint64_t seed = 9000;
  // File dataset parameters (PGM/PPM directories).
  std::string train_dir;
  std::string val_dir;
};

struct BaselineSpec {
  int epochs = 40;
  std::vector<double> mse_lambdas;
  std::vector<double> msssim_lambdas;
  std::string label = "baseline";
};

struct RewardSpec {
  bool use_preset = true;
  RewardPreset preset = RewardPreset::kMsssimFocus;
  TermShaping rate{ShapingKind::kQuadratic, 25.0};
  TermShaping psnr{ShapingKind::kQuadratic, 0.0};
  TermShaping msssim{ShapingKind::kLinear, 10.0};
};

// Everything a run needs, with documented defaults; loaded from a strict
// JSON file (unknown keys are rejected).
struct AppConfig {
  TraineeKind trainee = TraineeKind::kSurrogate;
  int arms = 8;               // B
  int trajectory_length = 10; // N
  int epochs = 400;           // T
  uint64_t seed = 0;
  double r_target = 0.3;
  RewardSpec reward;
  std::string psnr_curve_path;
  std::string msssim_curve_path;
  std::string out_dir = "runs/out";
  PPOConfig ppo;

  SurrogateConfig surrogate;  // curves filled from the paths below
  std::string surrogate_psnr_curve_path;   // empty: built-in synthetic curve
  std::string surrogate_msssim_curve_path;

  ToyCodecConfig toy;
  DatasetSpec dataset;
  BaselineSpec baseline;
};

AppConfig default_app_config();
AppConfig load_app_config(const std::string& path);
std::string app_config_to_json(const AppConfig& cfg);  // effective-config echo

}  // namespace hlic
