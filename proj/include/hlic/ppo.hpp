#pragma once

#include <array>
#include <vector>

#include "hlic/policy.hpp"

namespace hlic {

struct Transition {
  Observation observation{};
  std::array<double, 2> action_raw{};  // pre-clamp sample
  double log_prob_old = 0.0;
  double reward = 0.0;
  double value_old = 0.0;
};

// B trajectories of length N, trajectory-major, plus one critic bootstrap
// value per trajectory for the post-terminal observation.
struct TrajectoryBatch {
  int num_trajectories = 0;  // B
  int length = 0;            // N
  std::vector<Transition> transitions;
  std::vector<double> bootstrap_values;

  Transition& at(int traj, int step) {
    return transitions[static_cast<size_t>(traj) * length + step];
  }
  const Transition& at(int traj, int step) const {
    return transitions[static_cast<size_t>(traj) * length + step];
  }
  void validate() const;  // rectangular and finite
};

struct PPOConfig {
  double clip_epsilon = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int update_epochs = 4;
  double value_loss_weight = 0.5;
  double entropy_bonus_weight = 0.0;
  AdamConfig adam{3e-4, 0.9, 0.999, 1e-8};

  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma * V_{t+1} - V_t with V_N = bootstrap;
// A_t = sum_{l>=0} (gamma*lambda)^l delta_{t+l}; returns_t = A_t + V_t.
GaeResult gae(const std::vector<double>& rewards,
              const std::vector<double>& values, double bootstrap,
              double gamma, double gae_lambda);

// min(f*A, clip(f, 1-eps, 1+eps)*A) with f = exp(log_prob_new -
// log_prob_old). To be maximized.
double clipped_surrogate(double log_prob_new, double log_prob_old,
                         double advantage, double clip_epsilon);

// GAE advantages/returns for the whole batch, flattened trajectory-major.
GaeResult batch_gae(const TrajectoryBatch& batch, const PPOConfig& cfg);

// Zero-mean unit-variance normalization; single-element inputs are left
// unchanged.
void normalize_advantages(std::vector<double>& advantages);

struct UpdateDiagnostics {
  double mean_ratio_first = 0.0;  // importance ratio mean on the first pass
  double clip_fraction_first = 0.0;
  double mean_ratio_last = 0.0;
  double clip_fraction_last = 0.0;
  double value_loss_last = 0.0;
  double surrogate_last = 0.0;
};

// update_epochs full-batch passes maximizing the clipped surrogate minus
// value_loss_weight times the critic MSE. On a non-finite loss the net and
// both optimizers are restored and NumericError is thrown.
UpdateDiagnostics ppo_update(const TrajectoryBatch& batch, PolicyNet& net,
                             const PPOConfig& cfg);

}  // namespace hlic
