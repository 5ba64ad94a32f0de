#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "hlic/autodiff.hpp"

namespace hlic {

class Rng;

// One trainee evaluation. rate() is the R of the reward.
struct EvalStats {
  double psnr = 0.0;
  double ms_ssim = 1.0;
  double bpp_y = 0.0;
  double bpp_z = 0.0;
  double gradient_loss = 0.0;
  double total_variation = 0.0;

  double rate() const { return bpp_y + bpp_z; }
  void validate() const;
  bool operator==(const EvalStats&) const = default;
};

inline constexpr double kLambdaPrimeClamp = 20.0;

// The adapted distortion-weight pair, stored in log space.
class LambdaWeights {
 public:
  LambdaWeights() = default;
  // Clamps both log-weights to [-20, 20].
  LambdaWeights(double prime_mse, double prime_msssim);
  static LambdaWeights from_weights(double lambda_mse, double lambda_msssim);

  double prime_mse() const { return prime_mse_; }
  double prime_msssim() const { return prime_msssim_; }
  double mse_weight() const;     // e^{prime_mse}
  double msssim_weight() const;  // e^{prime_msssim}

 private:
  double prime_mse_ = 0.0;
  double prime_msssim_ = 0.0;
};

inline constexpr double kLikelihoodFloor = 1e-12;

// Probability that a unit-width quantization bin centered at y captures a
// N(mu, sigma^2) variable: Phi((y+1/2-mu)/sigma) - Phi((y-1/2-mu)/sigma).
double gaussian_uniform_likelihood(double y, double mu, double sigma);

// Mixture version: sum_k pi_k * gaussian_uniform_likelihood(y, mu_k, sigma_k).
double gmm_uniform_likelihood(double y, const std::vector<double>& pi,
                              const std::vector<double>& mu,
                              const std::vector<double>& sigma);

// Code length in bits for likelihood p, floored at kLikelihoodFloor.
double rate_bits_from_likelihood(double p);

// Differentiable bin likelihood; broadcasting rules of the graph ops apply.
Value gaussian_uniform_likelihood_graph(Graph& g, Value y, Value mu,
                                        Value sigma);

// Total code length in bits of a tensor of latents under per-element
// (mu, sigma), with the likelihood floored before the log.
Value rate_bits_graph(Graph& g, Value y, Value mu, Value sigma);

// rate_bits / n_pixels + e^{l'_mse} * mse + e^{l'_msssim} * (1 - ms_ssim).
Value rd_loss_graph(Graph& g, Value rate_bits, int64_t n_pixels, Value mse_val,
                    Value msssim_val, const LambdaWeights& lambda);

double rd_loss_value(double rate_bits, int64_t n_pixels, double mse_val,
                     double msssim_val, const LambdaWeights& lambda);

// A compression model being trained under an adapted loss. evaluate() must
// be deterministic given state, and copy_state_from must make two trainees
// evaluate() identically.
class Trainee {
 public:
  virtual ~Trainee() = default;

  // Runs one epoch of training under the given weights. Returns the
  // per-step training losses (may be empty for closed-form trainees).
  virtual std::vector<double> train_epoch(const LambdaWeights& lambda,
                                          Rng& rng) = 0;
  virtual EvalStats evaluate() const = 0;

  virtual std::unique_ptr<Trainee> clone() const = 0;
  virtual void copy_state_from(const Trainee& other) = 0;

  virtual void save_state(std::ostream& os) const = 0;
  virtual void load_state(std::istream& is) = 0;
};

}  // namespace hlic
