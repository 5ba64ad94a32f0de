#include "hlic/policy.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "hlic/error.hpp"
#include "hlic/textio.hpp"

#include "serialize_util.hpp"

namespace hlic {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)
constexpr double kTanhClip = 30.0;

double xavier_bound(int fan_in, int fan_out) {
  return std::sqrt(6.0 / (fan_in + fan_out));
}

Tensor xavier_init(int rows, int cols, Rng& rng) {
  Tensor t = Tensor::zeros({rows, cols});
  const double bound = xavier_bound(rows, cols);
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  t.requires_grad = true;
  return t;
}

Tensor zeros_param(int rows, int cols) {
  Tensor t = Tensor::zeros({rows, cols});
  t.requires_grad = true;
  return t;
}

// Plain MLP layer: out = tanh(x * W + b) when `activate`.
void dense_forward(const std::vector<double>& x, const Tensor& w,
                   const Tensor& b, bool activate, std::vector<double>& out) {
  const int in = w.shape[0], nout = w.shape[1];
  out.assign(static_cast<size_t>(nout), 0.0);
  for (int j = 0; j < nout; ++j) out[static_cast<size_t>(j)] = b.data[static_cast<size_t>(j)];
  for (int i = 0; i < in; ++i) {
    const double xi = x[static_cast<size_t>(i)];
    if (xi == 0.0) continue;
    const double* wrow = w.data.data() + static_cast<size_t>(i) * nout;
    for (int j = 0; j < nout; ++j) out[static_cast<size_t>(j)] += xi * wrow[j];
  }
  if (activate) {
    for (double& v : out) v = std::tanh(v);
  }
}

}  // namespace

Observation observe(const EvalStats& stats) {
  for (double v : {stats.psnr, stats.ms_ssim, stats.bpp_y, stats.bpp_z,
                   stats.gradient_loss, stats.total_variation}) {
    if (!std::isfinite(v)) {
      throw NumericError("observe: non-finite evaluation field");
    }
  }
  return {stats.ms_ssim,        stats.psnr / 40.0,
          stats.bpp_y,          stats.bpp_z,
          stats.gradient_loss / 0.1, stats.total_variation / 0.1};
}

double normal_log_prob(const std::array<double, 2>& mu,
                       const std::array<double, 2>& sigma,
                       const std::array<double, 2>& a) {
  double lp = 0.0;
  for (int d = 0; d < 2; ++d) {
    const double z = (a[static_cast<size_t>(d)] - mu[static_cast<size_t>(d)]) /
                     sigma[static_cast<size_t>(d)];
    lp += -0.5 * z * z - std::log(sigma[static_cast<size_t>(d)]) - kHalfLog2Pi;
  }
  return lp;
}

Action sample_action(const std::array<double, 2>& mu,
                     const std::array<double, 2>& sigma, Rng& rng) {
  Action act;
  for (int d = 0; d < 2; ++d) {
    if (!(sigma[static_cast<size_t>(d)] > 0.0)) {
      throw InvalidInput("sample_action: sigma must be positive");
    }
    act.raw[static_cast<size_t>(d)] =
        mu[static_cast<size_t>(d)] +
        sigma[static_cast<size_t>(d)] * rng.normal();
    double c = act.raw[static_cast<size_t>(d)];
    if (c < -kLambdaPrimeClamp) c = -kLambdaPrimeClamp;
    if (c > kLambdaPrimeClamp) c = kLambdaPrimeClamp;
    act.clamped[static_cast<size_t>(d)] = c;
  }
  act.log_prob = normal_log_prob(mu, sigma, act.raw);
  return act;
}

LambdaWeights lambda_from_prime(const std::array<double, 2>& prime) {
  return LambdaWeights(prime[0], prime[1]);
}

PolicyNet::PolicyNet(uint64_t seed, const AdamConfig& adam, PolicyConfig cfg)
    : cfg_(cfg), actor_opt_(adam), critic_opt_(adam) {
  Rng rng(seed);
  const int h = cfg_.hidden;
  w1_ = xavier_init(kObservationDim, h, rng);
  b1_ = zeros_param(1, h);
  w2_ = xavier_init(h, h, rng);
  b2_ = zeros_param(1, h);
  w3_ = zeros_param(h, 2);  // zero output layer: mu starts at the bias prior
  b3_ = zeros_param(1, 2);
  b3_.data[0] = cfg_.bias_prior_mse;
  b3_.data[1] = cfg_.bias_prior_msssim;
  log_std_ = zeros_param(1, 2);
  log_std_.data[0] = std::log(cfg_.sigma_init);
  log_std_.data[1] = std::log(cfg_.sigma_init);

  vw1_ = xavier_init(kObservationDim, h, rng);
  vb1_ = zeros_param(1, h);
  vw2_ = xavier_init(h, h, rng);
  vb2_ = zeros_param(1, h);
  vw3_ = zeros_param(h, 1);  // zero output layer: initial value is 0
  vb3_ = zeros_param(1, 1);

  actor_opt_.add_param("actor.w1", &w1_);
  actor_opt_.add_param("actor.b1", &b1_);
  actor_opt_.add_param("actor.w2", &w2_);
  actor_opt_.add_param("actor.b2", &b2_);
  actor_opt_.add_param("actor.w3", &w3_);
  actor_opt_.add_param("actor.b3", &b3_);
  actor_opt_.add_param("actor.log_std", &log_std_);
  critic_opt_.add_param("critic.w1", &vw1_);
  critic_opt_.add_param("critic.b1", &vb1_);
  critic_opt_.add_param("critic.w2", &vw2_);
  critic_opt_.add_param("critic.b2", &vb2_);
  critic_opt_.add_param("critic.w3", &vw3_);
  critic_opt_.add_param("critic.b3", &vb3_);
}

void PolicyNet::actor_forward(const Observation& o, std::array<double, 2>& mu,
                              std::array<double, 2>& sigma) const {
  std::vector<double> x(o.begin(), o.end()), h1, h2, out;
  dense_forward(x, w1_, b1_, true, h1);
  dense_forward(h1, w2_, b2_, true, h2);
  dense_forward(h2, w3_, b3_, false, out);
  mu = {out[0], out[1]};
  for (int d = 0; d < 2; ++d) {
    double ls = log_std_.data[static_cast<size_t>(d)];
    const double lo = std::log(cfg_.sigma_min), hi = std::log(cfg_.sigma_max);
    if (ls < lo) ls = lo;
    if (ls > hi) ls = hi;
    sigma[static_cast<size_t>(d)] = std::exp(ls);
  }
}

double PolicyNet::value(const Observation& o) const {
  std::vector<double> x(o.begin(), o.end()), h1, h2, out;
  dense_forward(x, vw1_, vb1_, true, h1);
  dense_forward(h1, vw2_, vb2_, true, h2);
  dense_forward(h2, vw3_, vb3_, false, out);
  return out[0];
}

namespace {

// tanh(x) = 1 - 2 / (e^{2x} + 1), with the preactivation clipped so the
// exponential cannot overflow.
Value tanh_graph(Graph& g, Value x) {
  Value clipped = g.clamp_min(x, -kTanhClip);
  clipped = g.neg(g.clamp_min(g.neg(clipped), -kTanhClip));
  Value e2x = g.exp(g.mul(g.constant(2.0), clipped));
  return g.sub(g.constant(1.0),
               g.div(g.constant(2.0), g.add(e2x, g.constant(1.0))));
}

Value dense_graph(Graph& g, Value x, Tensor& w, Tensor& b, bool activate) {
  Value out = g.add(g.matmul(x, g.leaf(w)), g.leaf(b));
  return activate ? tanh_graph(g, out) : out;
}

}  // namespace

PolicyNet::GraphActor PolicyNet::actor_forward_graph(Graph& g, Value obs) {
  Value h1 = dense_graph(g, obs, w1_, b1_, true);
  Value h2 = dense_graph(g, h1, w2_, b2_, true);
  Value mu = dense_graph(g, h2, w3_, b3_, false);
  Value ls = g.clamp_min(g.leaf(log_std_), std::log(cfg_.sigma_min));
  ls = g.neg(g.clamp_min(g.neg(ls), -std::log(cfg_.sigma_max)));
  return {mu, g.exp(ls)};
}

Value PolicyNet::critic_forward_graph(Graph& g, Value obs) {
  Value h1 = dense_graph(g, obs, vw1_, vb1_, true);
  Value h2 = dense_graph(g, h1, vw2_, vb2_, true);
  return dense_graph(g, h2, vw3_, vb3_, false);
}

std::vector<Tensor*> PolicyNet::actor_params() {
  return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_, &log_std_};
}

std::vector<Tensor*> PolicyNet::critic_params() {
  return {&vw1_, &vb1_, &vw2_, &vb2_, &vw3_, &vb3_};
}

void PolicyNet::save(std::ostream& os) const {
  os << "hlic_policy v1\n";
  os << "hidden " << cfg_.hidden << "\n";
  detail::write_tensor(os, "w1", w1_);
  detail::write_tensor(os, "b1", b1_);
  detail::write_tensor(os, "w2", w2_);
  detail::write_tensor(os, "b2", b2_);
  detail::write_tensor(os, "w3", w3_);
  detail::write_tensor(os, "b3", b3_);
  detail::write_tensor(os, "log_std", log_std_);
  detail::write_tensor(os, "vw1", vw1_);
  detail::write_tensor(os, "vb1", vb1_);
  detail::write_tensor(os, "vw2", vw2_);
  detail::write_tensor(os, "vb2", vb2_);
  detail::write_tensor(os, "vw3", vw3_);
  detail::write_tensor(os, "vb3", vb3_);
  detail::write_adam(os, actor_opt_);
  detail::write_adam(os, critic_opt_);
}

void PolicyNet::load(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  if (!is || magic != "hlic_policy" || version != "v1") {
    throw InvalidInput("policy state: bad header (expected 'hlic_policy v1')");
  }
  std::string key;
  int hidden = 0;
  is >> key >> hidden;
  if (!is || key != "hidden" || hidden != cfg_.hidden) {
    throw InvalidInput("policy state: hidden size mismatch");
  }
  detail::read_tensor(is, "w1", w1_);
  detail::read_tensor(is, "b1", b1_);
  detail::read_tensor(is, "w2", w2_);
  detail::read_tensor(is, "b2", b2_);
  detail::read_tensor(is, "w3", w3_);
  detail::read_tensor(is, "b3", b3_);
  detail::read_tensor(is, "log_std", log_std_);
  detail::read_tensor(is, "vw1", vw1_);
  detail::read_tensor(is, "vb1", vb1_);
  detail::read_tensor(is, "vw2", vw2_);
  detail::read_tensor(is, "vb2", vb2_);
  detail::read_tensor(is, "vw3", vw3_);
  detail::read_tensor(is, "vb3", vb3_);
  detail::read_adam(is, actor_opt_);
  detail::read_adam(is, critic_opt_);
}

bool PolicyNet::state_equals(const PolicyNet& other) const {
  auto teq = [](const Tensor& a, const Tensor& b) { return a.data == b.data; };
  return teq(w1_, other.w1_) && teq(b1_, other.b1_) && teq(w2_, other.w2_) &&
         teq(b2_, other.b2_) && teq(w3_, other.w3_) && teq(b3_, other.b3_) &&
         teq(log_std_, other.log_std_) && teq(vw1_, other.vw1_) &&
         teq(vb1_, other.vb1_) && teq(vw2_, other.vw2_) &&
         teq(vb2_, other.vb2_) && teq(vw3_, other.vw3_) &&
         teq(vb3_, other.vb3_);
}

}  // namespace hlic
