#include "hlic/codec.hpp"

#include <cmath>
#include <string>

#include "hlic/error.hpp"

namespace hlic {

namespace {
constexpr double kLog2E = 1.4426950408889634074;  // 1/ln(2)
}

void EvalStats::validate() const {
  for (double v : {psnr, ms_ssim, bpp_y, bpp_z, gradient_loss,
                   total_variation}) {
    if (!std::isfinite(v)) {
      throw NumericError("eval stats: non-finite field");
    }
  }
  if (bpp_y < 0.0 || bpp_z < 0.0) {
    throw NumericError("eval stats: negative bpp");
  }
  if (!(ms_ssim > 0.0 && ms_ssim <= 1.0)) {
    throw NumericError("eval stats: ms_ssim " + std::to_string(ms_ssim) +
                       " outside (0, 1]");
  }
}

LambdaWeights::LambdaWeights(double prime_mse, double prime_msssim) {
  auto clamp = [](double v) {
    if (v < -kLambdaPrimeClamp) return -kLambdaPrimeClamp;
    if (v > kLambdaPrimeClamp) return kLambdaPrimeClamp;
    return v;
  };
  if (std::isnan(prime_mse) || std::isnan(prime_msssim)) {
    throw NumericError("lambda weights: NaN log-weight");
  }
  prime_mse_ = clamp(prime_mse);
  prime_msssim_ = clamp(prime_msssim);
}

LambdaWeights LambdaWeights::from_weights(double lambda_mse,
                                          double lambda_msssim) {
  if (!(lambda_mse > 0.0) || !(lambda_msssim > 0.0)) {
    throw InvalidInput("lambda weights: weights must be positive");
  }
  return LambdaWeights(std::log(lambda_mse), std::log(lambda_msssim));
}

double LambdaWeights::mse_weight() const { return std::exp(prime_mse_); }
double LambdaWeights::msssim_weight() const { return std::exp(prime_msssim_); }

double gaussian_uniform_likelihood(double y, double mu, double sigma) {
  if (!(sigma > 0.0)) {
    throw InvalidInput("gaussian_uniform_likelihood: sigma " +
                       std::to_string(sigma) + " must be positive");
  }
  return normal_cdf((y + 0.5 - mu) / sigma) - normal_cdf((y - 0.5 - mu) / sigma);
}

double gmm_uniform_likelihood(double y, const std::vector<double>& pi,
                              const std::vector<double>& mu,
                              const std::vector<double>& sigma) {
  if (pi.empty() || pi.size() != mu.size() || pi.size() != sigma.size()) {
    throw InvalidInput("gmm_uniform_likelihood: component count mismatch");
  }
  double sum = 0.0;
  for (double w : pi) {
    if (w < 0.0) {
      throw InvalidInput("gmm_uniform_likelihood: negative mixture weight");
    }
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw InvalidInput("gmm_uniform_likelihood: weights sum to " +
                       std::to_string(sum) + ", expected 1");
  }
  double p = 0.0;
  for (size_t k = 0; k < pi.size(); ++k) {
    p += pi[k] * gaussian_uniform_likelihood(y, mu[k], sigma[k]);
  }
  return p;
}

double rate_bits_from_likelihood(double p) {
  if (p < kLikelihoodFloor) p = kLikelihoodFloor;
  return -std::log2(p);
}

Value gaussian_uniform_likelihood_graph(Graph& g, Value y, Value mu,
                                        Value sigma) {
  for (double s : sigma.tensor().data) {
    if (!(s > 0.0)) {
      throw InvalidInput("gaussian_uniform_likelihood: sigma must be positive");
    }
  }
  Value half = g.constant(0.5);
  Value centered = g.sub(y, mu);
  Value hi = g.div(g.add(centered, half), sigma);
  Value lo = g.div(g.sub(centered, half), sigma);
  return g.sub(g.normal_cdf(hi), g.normal_cdf(lo));
}

Value rate_bits_graph(Graph& g, Value y, Value mu, Value sigma) {
  Value p = gaussian_uniform_likelihood_graph(g, y, mu, sigma);
  Value log_p = g.log(g.clamp_min(p, kLikelihoodFloor));
  return g.mul(g.constant(-kLog2E), g.reduce_sum(log_p));
}

Value rd_loss_graph(Graph& g, Value rate_bits, int64_t n_pixels, Value mse_val,
                    Value msssim_val, const LambdaWeights& lambda) {
  if (n_pixels <= 0) throw InvalidInput("rd_loss: n_pixels must be positive");
  for (Value v : {rate_bits, mse_val, msssim_val}) {
    if (!v.tensor().all_finite()) {
      throw NumericError("rd_loss: non-finite input term");
    }
  }
  Value bpp = g.div(rate_bits, g.constant(static_cast<double>(n_pixels)));
  Value mse_term = g.mul(g.constant(lambda.mse_weight()), mse_val);
  Value msssim_term = g.mul(g.constant(lambda.msssim_weight()),
                            g.sub(g.constant(1.0), msssim_val));
  return g.add(bpp, g.add(mse_term, msssim_term));
}

double rd_loss_value(double rate_bits, int64_t n_pixels, double mse_val,
                     double msssim_val, const LambdaWeights& lambda) {
  Graph g;
  return rd_loss_graph(g, g.constant(rate_bits), n_pixels,
                       g.constant(mse_val), g.constant(msssim_val), lambda)
      .scalar();
}

}  // namespace hlic
