#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "hlic/codec.hpp"
#include "hlic/policy.hpp"
#include "hlic/ppo.hpp"
#include "hlic/reward.hpp"

namespace hlic {

enum class TraineeKind { kSurrogate, kToyCodec };
const char* trainee_kind_name(TraineeKind kind);
TraineeKind trainee_kind_from_name(const std::string& name);

struct RunConfig {
  TraineeKind trainee = TraineeKind::kSurrogate;
  int num_trainees = 8;       // B
  int trajectory_length = 10; // N
  int total_epochs = 400;     // T, must be a multiple of N
  RewardConfig reward;
  PPOConfig ppo;
  PolicyConfig policy;
  uint64_t seed = 0;

  void validate() const;
};

struct TraineeEpochRecord {
  bool has_lambda = false;   // lambda columns populated
  bool has_action = false;   // sampled-action columns populated
  std::array<double, 2> lambda_prime{};  // applied (clamped) log-weights
  std::array<double, 2> action_raw{};
  double log_prob = 0.0;
  double value_pred = 0.0;
  EvalStats stats;
  RewardBreakdown reward;
  bool has_reward = false;
};

struct EpochRecord {
  int epoch = 0;  // 0 is the initial evaluation
  std::vector<TraineeEpochRecord> trainees;
  bool did_update = false;
  int best_index = -1;
  UpdateDiagnostics ppo;
};

struct RunLog {
  std::vector<EpochRecord> epochs;
};

using TraineeFactory = std::function<std::unique_ptr<Trainee>()>;

struct HlicResult {
  RunLog log;
  std::unique_ptr<Trainee> best_trainee;
  std::unique_ptr<PolicyNet> policy;
};

// Full control loop: per epoch, sample one weight pair per trainee from the
// shared policy, train and evaluate all B trainees, and every N epochs run
// one PPO update and broadcast the highest-reward trainee's state (and its
// observation) to all arms.
HlicResult run_hlic(const RunConfig& cfg, const TraineeFactory& make_trainee);

struct FixedResult {
  RunLog log;
  std::unique_ptr<Trainee> trainee;
  EvalStats final_stats;
};

// Trains one trainee under a constant weight pair. Rewards are logged only
// when a reward config is supplied (baseline generation runs without one).
FixedResult run_fixed(const LambdaWeights& lambda, int total_epochs,
                      uint64_t seed, const TraineeFactory& make_trainee,
                      const std::optional<RewardConfig>& reward = {});

// Overwrites every trainee with the argmax-reward state (ties break to the
// lowest index). Returns the winning index.
int broadcast_best(std::vector<std::unique_ptr<Trainee>>& trainees,
                   const std::vector<double>& rewards);

enum class ManualGridKind { kMsssimPref, kMsePref };
ManualGridKind manual_grid_kind_from_name(const std::string& name);
const char* manual_grid_kind_name(ManualGridKind kind);

// Hand-crafted weight tables; i in 0..5 trades the metrics, j in 0..3 sets
// the rate point.
LambdaWeights manual_grid_weights(ManualGridKind kind, int i, int j);

// Run-log CSV schema (stable column order, one row per trainee per epoch).
extern const char* const kRunCsvHeader;
void write_run_csv(const RunLog& log, const std::string& path);
RunLog read_run_csv(const std::string& path);

// The applied lambda of the best arm in the final epoch (fixed runs: the
// constant lambda). Throws if the log carries no lambda columns.
LambdaWeights final_adapted_lambda(const RunLog& log);

void write_run_summary(const RunLog& log, const std::string& mode,
                       uint64_t seed, TraineeKind kind,
                       const std::string& path);

}  // namespace hlic
