#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>

#include "hlic/autodiff.hpp"
#include "hlic/codec.hpp"
#include "hlic/rng.hpp"

namespace hlic {

inline constexpr int kObservationDim = 6;

// Normalized floats in order (ms_ssim, psnr, bpp_y, bpp_z, gradient_loss,
// total_variation).
using Observation = std::array<double, kObservationDim>;

// Fixed affine normalization: ms_ssim as-is, psnr/40, bpp as-is,
// gradient_loss/0.1, total_variation/0.1.
Observation observe(const EvalStats& stats);

struct PolicyConfig {
  int hidden = 64;
  double sigma_init = 0.5;
  // Output-layer bias prior: first sampled weights land near
  // (lambda_mse, lambda_msssim) = (0.01, 1.0).
  double bias_prior_mse = -4.605170185988091;  // ln 0.01
  double bias_prior_msssim = 0.0;              // ln 1
  double sigma_min = 1e-3;
  double sigma_max = 2.0;
};

struct Action {
  std::array<double, 2> raw;      // pre-clamp Normal sample (kept for PPO)
  std::array<double, 2> clamped;  // applied to the trainee, in [-20, 20]
  double log_prob = 0.0;          // density of the pre-clamp sample
};

// Diagonal-Gaussian log density of `a` under (mu, sigma).
double normal_log_prob(const std::array<double, 2>& mu,
                       const std::array<double, 2>& sigma,
                       const std::array<double, 2>& a);

Action sample_action(const std::array<double, 2>& mu,
                     const std::array<double, 2>& sigma, Rng& rng);

// Eq-6 reparameterization of a log-weight pair.
LambdaWeights lambda_from_prime(const std::array<double, 2>& prime);

// Actor MLP (obs -> 2 means, tanh hidden layers) with a state-independent
// learnable log-std pair, plus an independent critic MLP (obs -> 1).
class PolicyNet {
 public:
  PolicyNet(uint64_t seed, const AdamConfig& adam, PolicyConfig cfg = {});

  void actor_forward(const Observation& o, std::array<double, 2>& mu,
                     std::array<double, 2>& sigma) const;
  double value(const Observation& o) const;

  struct GraphActor {
    Value mu;     // [n, 2]
    Value sigma;  // [1, 2]
  };
  // Graph-mode forwards over a batch of observations [n, 6]; used by the
  // PPO update so gradients reach the parameters.
  GraphActor actor_forward_graph(Graph& g, Value obs);
  Value critic_forward_graph(Graph& g, Value obs);  // [n, 1]

  AdamOptimizer& actor_opt() { return actor_opt_; }
  AdamOptimizer& critic_opt() { return critic_opt_; }
  std::vector<Tensor*> actor_params();
  std::vector<Tensor*> critic_params();

  const PolicyConfig& config() const { return cfg_; }

  void save(std::ostream& os) const;
  void load(std::istream& is);
  bool state_equals(const PolicyNet& other) const;

 private:
  PolicyConfig cfg_;
  // Actor.
  Tensor w1_, b1_, w2_, b2_, w3_, b3_, log_std_;
  // Critic.
  Tensor vw1_, vb1_, vw2_, vb2_, vw3_, vb3_;
  AdamOptimizer actor_opt_;
  AdamOptimizer critic_opt_;
};

}  // namespace hlic
