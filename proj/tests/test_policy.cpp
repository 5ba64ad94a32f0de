#include <cmath>
#include <sstream>

#include "doctest.h"
#include "hlic/error.hpp"
#include "hlic/policy.hpp"
#include "support/gradient_check.hpp"

using namespace hlic;
using hlic::test::check_gradient;

namespace {

EvalStats demo_stats() {
  EvalStats s;
  s.ms_ssim = 0.95;
  s.psnr = 32.0;
  s.bpp_y = 0.4;
  s.bpp_z = 0.05;
  s.gradient_loss = 0.01;
  s.total_variation = 0.03;
  return s;
}

AdamConfig policy_adam() {
  AdamConfig a;
  a.lr = 3e-4;
  return a;
}

Observation random_obs(Rng& rng) {
  Observation o;
  for (double& v : o) v = rng.uniform(0.0, 1.2);
  return o;
}

}  // namespace

TEST_CASE("observe applies the fixed normalization") {
  Observation o = observe(demo_stats());
  CHECK(o[0] == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(o[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(o[2] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(o[3] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(o[4] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(o[5] == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("observe of all-zero stats is all zeros and deterministic") {
  EvalStats zero;
  zero.ms_ssim = 0.0;
  Observation o = observe(zero);
  for (double v : o) CHECK(v == 0.0);
  CHECK(observe(demo_stats()) == observe(demo_stats()));

  EvalStats bad = demo_stats();
  bad.psnr = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(observe(bad), NumericError);
}

TEST_CASE("fresh policy outputs the bias prior for any observation") {
  PolicyNet net(123, policy_adam());
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    std::array<double, 2> mu, sigma;
    net.actor_forward(random_obs(rng), mu, sigma);
    CHECK(mu[0] == doctest::Approx(-4.6052).epsilon(1e-4));
    CHECK(mu[1] == 0.0);
    CHECK(sigma[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sigma[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(net.value(random_obs(rng)) == 0.0);
  }
}

TEST_CASE("perturbed policies stay finite") {
  PolicyNet net(7, policy_adam());
  Rng rng(8);
  for (Tensor* t : net.actor_params()) {
    for (double& v : t->data) v += rng.uniform(-0.5, 0.5);
  }
  for (Tensor* t : net.critic_params()) {
    for (double& v : t->data) v += rng.uniform(-0.5, 0.5);
  }
  for (int i = 0; i < 25; ++i) {
    std::array<double, 2> mu, sigma;
    Observation o = random_obs(rng);
    net.actor_forward(o, mu, sigma);
    CHECK(std::isfinite(mu[0]));
    CHECK(std::isfinite(mu[1]));
    CHECK(sigma[0] > 0.0);
    CHECK(sigma[1] > 0.0);
    CHECK(sigma[0] <= 2.0);
    CHECK(sigma[1] <= 2.0);
    CHECK(std::isfinite(net.value(o)));
  }
}

TEST_CASE("graph forward agrees with the plain forward") {
  PolicyNet net(21, policy_adam());
  Rng rng(9);
  for (Tensor* t : net.actor_params()) {
    for (double& v : t->data) v += rng.uniform(-0.4, 0.4);
  }
  for (Tensor* t : net.critic_params()) {
    for (double& v : t->data) v += rng.uniform(-0.4, 0.4);
  }
  for (int i = 0; i < 10; ++i) {
    Observation o = random_obs(rng);
    std::array<double, 2> mu, sigma;
    net.actor_forward(o, mu, sigma);
    const double v = net.value(o);

    Graph g;
    Tensor obs = Tensor::from({1, kObservationDim},
                              std::vector<double>(o.begin(), o.end()));
    auto actor = net.actor_forward_graph(g, g.constant(obs));
    CHECK(actor.mu.tensor().data[0] == doctest::Approx(mu[0]).epsilon(1e-12));
    CHECK(actor.mu.tensor().data[1] == doctest::Approx(mu[1]).epsilon(1e-12));
    CHECK(actor.sigma.tensor().data[0] ==
          doctest::Approx(sigma[0]).epsilon(1e-12));
    Graph g2;
    Value val = net.critic_forward_graph(g2, g2.constant(obs));
    CHECK(val.tensor().data[0] == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("sampling") {
  SUBCASE("degenerate sigma returns the mean") {
    Rng rng(3);
    Action a = sample_action({1.0, 2.0}, {1e-3, 1e-3}, rng);
    CHECK(a.raw[0] == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(a.raw[1] == doctest::Approx(2.0).epsilon(1e-2));
  }
  SUBCASE("log-prob of the mean under unit sigma") {
    CHECK(normal_log_prob({0.3, -1.0}, {1.0, 1.0}, {0.3, -1.0}) ==
          doctest::Approx(-1.83788).epsilon(1e-5));
  }
  SUBCASE("same seed gives the identical sample") {
    Rng a(42), b(42);
    Action x = sample_action({0.0, 0.0}, {0.5, 0.5}, a);
    Action y = sample_action({0.0, 0.0}, {0.5, 0.5}, b);
    CHECK(x.raw == y.raw);
    CHECK(x.log_prob == y.log_prob);
  }
  SUBCASE("returned log_prob matches re-evaluation on the raw sample") {
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
      std::array<double, 2> mu = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
      std::array<double, 2> sigma = {rng.uniform(0.01, 2.0),
                                     rng.uniform(0.01, 2.0)};
      Action a = sample_action(mu, sigma, rng);
      CHECK(std::fabs(normal_log_prob(mu, sigma, a.raw) - a.log_prob) <
            1e-12);
    }
  }
  SUBCASE("clamping keeps the applied action in range") {
    Rng rng(12);
    Action a = sample_action({25.0, -25.0}, {0.5, 0.5}, rng);
    CHECK(a.clamped[0] == 20.0);
    CHECK(a.clamped[1] == -20.0);
    CHECK(a.raw[0] > 20.0);
  }
}

TEST_CASE("lambda_from_prime") {
  LambdaWeights unit = lambda_from_prime({0.0, 0.0});
  CHECK(unit.mse_weight() == 1.0);
  CHECK(unit.msssim_weight() == 1.0);

  LambdaWeights manual =
      lambda_from_prime({std::log(0.0128), std::log(120.0)});
  CHECK(manual.mse_weight() == doctest::Approx(0.0128).epsilon(1e-12));
  CHECK(manual.msssim_weight() == doctest::Approx(120.0).epsilon(1e-12));

  // Monotone in each coordinate.
  CHECK(lambda_from_prime({-1.0, 0.0}).mse_weight() <
        lambda_from_prime({0.5, 0.0}).mse_weight());
}

TEST_CASE("critic gradient matches finite differences") {
  PolicyNet net(33, policy_adam());
  Rng rng(13);
  for (Tensor* t : net.critic_params()) {
    for (double& v : t->data) v += rng.uniform(-0.3, 0.3);
  }
  Observation o = random_obs(rng);
  Tensor obs = Tensor::from({1, kObservationDim},
                            std::vector<double>(o.begin(), o.end()));
  auto build = [&](Graph& g) {
    return g.reduce_sum(net.critic_forward_graph(g, g.constant(obs)));
  };
  auto res = check_gradient(build, net.critic_params());
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("actor and critic gradients are independent") {
  PolicyNet net(44, policy_adam());
  Rng rng(14);
  Observation o = random_obs(rng);
  Tensor obs = Tensor::from({1, kObservationDim},
                            std::vector<double>(o.begin(), o.end()));
  for (Tensor* t : net.actor_params()) {
    t->zero_grad();
  }
  for (Tensor* t : net.critic_params()) {
    t->zero_grad();
  }
  {
    Graph g;
    auto actor = net.actor_forward_graph(g, g.constant(obs));
    g.backward(g.reduce_sum(actor.mu));
  }
  for (Tensor* t : net.critic_params()) {
    for (double v : t->grad) CHECK(v == 0.0);
  }
  bool actor_moved = false;
  for (Tensor* t : net.actor_params()) {
    for (double v : t->grad) actor_moved = actor_moved || v != 0.0;
  }
  CHECK(actor_moved);
}

TEST_CASE("policy serialization round trip") {
  PolicyNet net(55, policy_adam());
  Rng rng(15);
  for (Tensor* t : net.actor_params()) {
    for (double& v : t->data) v += rng.uniform(-0.2, 0.2);
  }
  // Touch the optimizers so moments are non-trivial.
  for (Tensor* t : net.actor_params()) {
    t->ensure_grad();
    for (double& gv : t->grad) gv = rng.uniform(-0.1, 0.1);
  }
  net.actor_opt().step();

  std::ostringstream os;
  net.save(os);

  PolicyNet other(999, policy_adam());
  CHECK_FALSE(other.state_equals(net));
  std::istringstream is(os.str());
  other.load(is);
  CHECK(other.state_equals(net));
  CHECK(other.actor_opt().step_count() == net.actor_opt().step_count());
  CHECK(other.actor_opt().slots()[0].m == net.actor_opt().slots()[0].m);

  std::istringstream bad("hlic_policy v9\n");
  PolicyNet third(1, policy_adam());
  CHECK_THROWS_AS(third.load(bad), InvalidInput);
}
