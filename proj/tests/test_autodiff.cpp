#include <cmath>

#include "doctest.h"
#include "hlic/autodiff.hpp"
#include "hlic/error.hpp"
#include "hlic/rng.hpp"
#include "support/gradient_check.hpp"

using namespace hlic;
using hlic::test::check_gradient;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -2.0,
                     double hi = 2.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("elementwise forward basics") {
  Graph g;
  Value e = g.exp(g.constant(Tensor::scalar(0.0)));
  CHECK(e.scalar() == doctest::Approx(1.0).epsilon(1e-15));

  Value c = g.normal_cdf(g.constant(Tensor::scalar(0.0)));
  CHECK(c.scalar() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("matmul of ones") {
  Graph g;
  Value a = g.constant(Tensor::full({2, 3}, 1.0));
  Value b = g.constant(Tensor::full({3, 1}, 1.0));
  Value m = g.matmul(a, b);
  const Tensor& t = m.tensor();
  REQUIRE(t.shape == std::vector<int>{2, 1});
  CHECK(t.data[0] == doctest::Approx(3.0));
  CHECK(t.data[1] == doctest::Approx(3.0));
}

TEST_CASE("gaussian blur of a constant image stays constant") {
  Graph g;
  Value img = g.constant(Tensor::full({17, 13}, 4.25));
  Value b = g.gaussian_blur_2d(img, 2, 1.1);
  const Tensor& t = b.tensor();
  REQUIRE(t.shape == std::vector<int>{13, 9});
  for (double v : t.data) CHECK(v == doctest::Approx(4.25).epsilon(1e-12));
}

TEST_CASE("gaussian kernel sums to one") {
  for (auto [r, s] : {std::pair{1, 0.8}, {5, 1.5}, {7, 3.0}}) {
    auto k = gaussian_kernel(r, s);
    double sum = 0.0;
    for (double v : k) sum += v;
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("simple gradients") {
  SUBCASE("d(x*x)/dx = 2x at x=3") {
    Tensor x = Tensor::scalar(3.0);
    x.requires_grad = true;
    Graph g;
    Value vx = g.leaf(x);
    g.backward(g.mul(vx, vx));
    CHECK(x.grad[0] == doctest::Approx(6.0).epsilon(1e-15));
  }
  SUBCASE("d(exp x)/dx = 1 at x=0") {
    Tensor x = Tensor::scalar(0.0);
    x.requires_grad = true;
    Graph g;
    Value vx = g.leaf(x);
    g.backward(g.exp(vx));
    CHECK(x.grad[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("composite mean(W*v) against finite differences") {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor w = random_tensor({4, 4}, rng);
    Tensor v = random_tensor({4, 1}, rng);
    auto build = [&](Graph& g) {
      return g.reduce_mean(g.matmul(g.leaf(w), g.leaf(v)));
    };
    auto res = check_gradient(build, {&w, &v});
    CHECK(res.max_rel_err < 1e-6);
  }
}

TEST_CASE("finite-difference check for every op kind") {
  Rng rng(7);
  const int reps = 20;

  SUBCASE("binary elementwise, same shape") {
    for (int rep = 0; rep < reps; ++rep) {
      Tensor a = random_tensor({3, 4}, rng);
      Tensor b = random_tensor({3, 4}, rng, 0.5, 2.0);  // safe divisor
      for (auto op : {Op::kAdd, Op::kSub, Op::kMul, Op::kDiv}) {
        auto build = [&](Graph& g) {
          return g.reduce_sum(g.apply(op, {g.leaf(a), g.leaf(b)}));
        };
        auto res = check_gradient(build, {&a, &b});
        CAPTURE(op_name(op));
        CHECK(res.max_rel_err < 1e-4);
      }
    }
  }

  SUBCASE("binary elementwise with broadcasting") {
    for (int rep = 0; rep < reps; ++rep) {
      Tensor a = random_tensor({5, 3}, rng);
      Tensor row = random_tensor({1, 3}, rng, 0.5, 2.0);
      Tensor col = random_tensor({5, 1}, rng, 0.5, 2.0);
      Tensor scalar = random_tensor({1}, rng, 0.5, 2.0);
      for (Tensor* other : {&row, &col, &scalar}) {
        for (auto op : {Op::kAdd, Op::kSub, Op::kMul, Op::kDiv}) {
          auto build = [&](Graph& g) {
            return g.reduce_sum(g.apply(op, {g.leaf(a), g.leaf(*other)}));
          };
          auto res = check_gradient(build, {&a, other});
          CHECK(res.max_rel_err < 1e-4);
        }
      }
    }
  }

  SUBCASE("unary elementwise") {
    for (int rep = 0; rep < reps; ++rep) {
      Tensor a = random_tensor({4, 5}, rng, 0.2, 2.5);  // positive for log/pow
      for (auto op : {Op::kNeg, Op::kExp, Op::kLog, Op::kNormalCdf}) {
        auto build = [&](Graph& g) {
          return g.reduce_mean(g.apply(op, {g.leaf(a)}));
        };
        auto res = check_gradient(build, {&a});
        CAPTURE(op_name(op));
        CHECK(res.max_rel_err < 1e-4);
      }
      auto build_pow = [&](Graph& g) {
        return g.reduce_mean(g.pow_const(g.leaf(a), 0.37));
      };
      CHECK(check_gradient(build_pow, {&a}).max_rel_err < 1e-4);
    }
  }

  SUBCASE("clamp_min away from the bound") {
    for (int rep = 0; rep < reps; ++rep) {
      Tensor a = random_tensor({4, 4}, rng);
      // Keep elements off the kink so central differences are valid.
      for (double& v : a.data) {
        if (std::fabs(v - 0.1) < 0.02) v += 0.05;
      }
      auto build = [&](Graph& g) {
        return g.reduce_sum(g.clamp_min(g.leaf(a), 0.1));
      };
      CHECK(check_gradient(build, {&a}).max_rel_err < 1e-4);
    }
  }

  SUBCASE("matmul") {
    for (int rep = 0; rep < reps; ++rep) {
      Tensor a = random_tensor({3, 5}, rng);
      Tensor b = random_tensor({5, 2}, rng);
      auto build = [&](Graph& g) {
        return g.reduce_sum(g.matmul(g.leaf(a), g.leaf(b)));
      };
      CHECK(check_gradient(build, {&a, &b}).max_rel_err < 1e-4);
    }
  }

  SUBCASE("reductions") {
    for (int rep = 0; rep < reps; ++rep) {
      Tensor a = random_tensor({6, 3}, rng);
      for (auto op : {Op::kReduceMean, Op::kReduceSum}) {
        auto build = [&](Graph& g) {
          // Square first so the gradient is input-dependent.
          Value x = g.leaf(a);
          return g.apply(op, {g.mul(x, x)});
        };
        CHECK(check_gradient(build, {&a}).max_rel_err < 1e-4);
      }
    }
  }

  SUBCASE("gaussian_blur_2d") {
    for (int rep = 0; rep < reps; ++rep) {
      Tensor a = random_tensor({9, 11}, rng);
      auto build = [&](Graph& g) {
        Value b = g.gaussian_blur_2d(g.leaf(a), 2, 1.4);
        return g.reduce_sum(g.mul(b, b));
      };
      CHECK(check_gradient(build, {&a}).max_rel_err < 1e-4);
    }
  }

  SUBCASE("avg_downsample_2x including odd sizes") {
    for (int rep = 0; rep < reps; ++rep) {
      Tensor a = random_tensor({7, 9}, rng);
      auto build = [&](Graph& g) {
        Value d = g.avg_downsample_2x(g.leaf(a));
        return g.reduce_sum(g.mul(d, d));
      };
      CHECK(check_gradient(build, {&a}).max_rel_err < 1e-4);
    }
  }

  SUBCASE("add_uniform_noise is an identity for gradients") {
    for (int rep = 0; rep < reps; ++rep) {
      Tensor a = random_tensor({3, 3}, rng);
      const uint64_t seed = rng.next_u64();
      auto build = [&](Graph& g) {
        Rng noise(seed);
        Value y = g.add_uniform_noise(g.leaf(a), noise);
        return g.reduce_sum(g.mul(y, y));
      };
      CHECK(check_gradient(build, {&a}).max_rel_err < 1e-4);
    }
  }

  SUBCASE("untile_blocks") {
    for (int rep = 0; rep < reps; ++rep) {
      Tensor a = random_tensor({6, 4}, rng);  // 3x2 grid of 2x2 blocks
      auto build = [&](Graph& g) {
        Value img = g.untile_blocks(g.leaf(a), 2, 2, 3, 2);
        return g.reduce_sum(g.mul(img, img));
      };
      CHECK(check_gradient(build, {&a}).max_rel_err < 1e-4);
    }
  }
}

TEST_CASE("untile_blocks forward layout") {
  Graph g;
  // 2x2 grid of 2x2 blocks: blocks hold 0..3, 10..13, 20..23, 30..33.
  Tensor blocks = Tensor::from(
      {4, 4}, {0, 1, 2, 3, 10, 11, 12, 13, 20, 21, 22, 23, 30, 31, 32, 33});
  Value img = g.untile_blocks(g.constant(blocks), 2, 2, 2, 2);
  const Tensor& t = img.tensor();
  REQUIRE(t.shape == std::vector<int>{4, 4});
  std::vector<double> expected = {0, 1, 10, 11, 2,  3,  12, 13,
                                  20, 21, 30, 31, 22, 23, 32, 33};
  CHECK(t.data == expected);
}

TEST_CASE("backward linearity over two graphs") {
  Rng rng(99);
  Tensor x = random_tensor({3, 3}, rng, 0.2, 1.5);
  x.requires_grad = true;

  auto f = [&](Graph& g) {
    Value v = g.leaf(x);
    return g.reduce_sum(g.mul(v, v));
  };
  auto h = [&](Graph& g) {
    Value v = g.leaf(x);
    return g.reduce_mean(g.exp(v));
  };

  x.zero_grad();
  {
    Graph g;
    g.backward(g.add(f(g), h(g)));
  }
  std::vector<double> combined = x.grad;

  x.zero_grad();
  {
    Graph g;
    g.backward(f(g));
  }
  {
    Graph g;
    g.backward(h(g));
  }
  for (size_t i = 0; i < combined.size(); ++i) {
    CHECK(x.grad[i] == doctest::Approx(combined[i]).epsilon(1e-12));
  }
}

TEST_CASE("determinism: same seed, same outputs") {
  auto run = [] {
    Rng rng(1234);
    Tensor a = random_tensor({4, 4}, rng);
    Graph g;
    Rng noise(77);
    Value y = g.add_uniform_noise(g.constant(a), noise);
    return g.reduce_sum(g.mul(y, y)).scalar();
  };
  CHECK(run() == run());
}

TEST_CASE("error paths") {
  SUBCASE("shape mismatch names the op and shapes") {
    Graph g;
    Value a = g.constant(Tensor::zeros({2, 3}));
    Value b = g.constant(Tensor::zeros({4, 5}));
    CHECK_THROWS_WITH_AS(g.add(a, b), "add: shape mismatch [2,3] vs [4,5]",
                         InvalidInput);
  }
  SUBCASE("matmul inner dimension") {
    Graph g;
    Value a = g.constant(Tensor::zeros({2, 3}));
    Value b = g.constant(Tensor::zeros({4, 1}));
    CHECK_THROWS_AS(g.matmul(a, b), InvalidInput);
  }
  SUBCASE("log of non-positive input") {
    Graph g;
    CHECK_THROWS_AS(g.log(g.constant(Tensor::scalar(0.0))), NumericError);
    CHECK_THROWS_AS(g.log(g.constant(Tensor::scalar(-1.0))), NumericError);
  }
  SUBCASE("division by zero") {
    Graph g;
    CHECK_THROWS_AS(
        g.div(g.constant(Tensor::scalar(1.0)), g.constant(Tensor::scalar(0.0))),
        NumericError);
  }
  SUBCASE("backward requires scalar output") {
    Tensor x = Tensor::zeros({2, 2});
    x.requires_grad = true;
    Graph g;
    Value v = g.leaf(x);
    CHECK_THROWS_AS(g.backward(v), InvalidInput);
  }
  SUBCASE("backward twice") {
    Tensor x = Tensor::scalar(1.0);
    x.requires_grad = true;
    Graph g;
    Value out = g.reduce_sum(g.leaf(x));
    g.backward(out);
    CHECK_THROWS_AS(g.backward(out), InvalidInput);
  }
}

TEST_CASE("adam single step moves by about lr against the gradient sign") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  Tensor p = Tensor::from({3}, {1.0, -2.0, 0.5});
  Tensor start = p;
  p.ensure_grad();
  p.grad = {0.3, -4.0, 1e-3};
  AdamOptimizer opt(cfg);
  opt.add_param("p", &p);
  opt.step();
  for (size_t i = 0; i < p.data.size(); ++i) {
    const double moved = p.data[i] - start.data[i];
    const double sign = p.grad[i] > 0 ? 1.0 : -1.0;
    // First-step closed form: -lr * g / (|g| + eps) ~= -lr * sign(g).
    CHECK(moved == doctest::Approx(-cfg.lr * sign).epsilon(1e-4));
  }
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam zero gradient leaves parameters unchanged, moments decay") {
  AdamConfig cfg;
  Tensor p = Tensor::from({2}, {1.0, 2.0});
  p.ensure_grad();
  AdamOptimizer opt(cfg);
  opt.add_param("p", &p);
  opt.step();
  CHECK(p.data[0] == 1.0);
  CHECK(p.data[1] == 2.0);
  CHECK(opt.slots()[0].m[0] == 0.0);
  CHECK(opt.slots()[0].v[0] == 0.0);
}

TEST_CASE("adam two steps with constant gradient match hand recurrence") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  const double g = 0.7;
  Tensor p = Tensor::from({1}, {3.0});
  AdamOptimizer opt(cfg);
  opt.add_param("p", &p);

  // Hand-unrolled recurrence.
  double m = 0.0, v = 0.0, x = 3.0;
  for (int t = 1; t <= 2; ++t) {
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mhat = m / (1 - std::pow(cfg.beta1, t));
    const double vhat = v / (1 - std::pow(cfg.beta2, t));
    x -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }

  for (int t = 0; t < 2; ++t) {
    p.ensure_grad();
    p.grad[0] = g;
    opt.step();
  }
  CHECK(p.data[0] == x);  // bit-equal
}

TEST_CASE("adam rejects non-finite gradients naming the parameter") {
  Tensor p = Tensor::from({1}, {0.0});
  p.ensure_grad();
  p.grad[0] = std::numeric_limits<double>::quiet_NaN();
  AdamOptimizer opt(AdamConfig{});
  opt.add_param("weights", &p);
  CHECK_THROWS_WITH_AS(opt.step(),
                       "adam_step: non-finite gradient in parameter "
                       "'weights' at element 0",
                       NumericError);
}
