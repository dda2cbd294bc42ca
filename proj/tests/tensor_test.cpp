#include "dyad/tensor.hpp"

#include <algorithm>
#include <random>

#include "doctest.h"
#include "test_support.hpp"

using namespace dyad;

TEST_CASE("matmul basics") {
  auto eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  auto v = Tensor::from_data({2, 1}, {3, 4});
  auto r = matmul(eye, v);
  CHECK(r.shape() == Shape{2, 1});
  CHECK(r.data()[0] == 3);
  CHECK(r.data()[1] == 4);

  auto a = Tensor::from_data({1, 2}, {1, 2});
  CHECK(matmul(a, v).data()[0] == 11);  // 1*3 + 2*4

  auto bad_a = Tensor::zeros({2, 3});
  auto bad_b = Tensor::zeros({4, 5});
  CHECK_THROWS_WITH_AS(matmul(bad_a, bad_b),
                       doctest::Contains("(2,3)"), std::invalid_argument);
}

TEST_CASE("elementwise ops") {
  auto x = Tensor::from_data({3}, {-1, 0, 2});
  auto r = relu(x);
  CHECK(r.data()[0] == 0);
  CHECK(r.data()[1] == 0);
  CHECK(r.data()[2] == 2);

  auto s = add(Tensor::from_data({2}, {1, 2}), Tensor::from_data({2}, {3, 4}));
  CHECK(s.data()[0] == 4);
  CHECK(s.data()[1] == 6);

  CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})),
                  std::invalid_argument);
}

TEST_CASE("relu gradient, subgradient at zero is zero") {
  auto x = Tensor::from_data({2}, {-1, 2}, true);
  sum(relu(x)).backward();
  CHECK(x.grad()[0] == 0);
  CHECK(x.grad()[1] == 1);

  auto z = Tensor::from_data({1}, {0.0}, true);
  sum(relu(z)).backward();
  CHECK(z.grad()[0] == 0);
}

TEST_CASE("softmax values and stability") {
  auto u = softmax(Tensor::from_data({3}, {0, 0, 0}), 0);
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

  auto big = softmax(Tensor::from_data({2}, {1000, 0}), 0);
  CHECK(big.data()[0] == doctest::Approx(1.0));
  CHECK(big.data()[1] == doctest::Approx(0.0));

  auto ln = softmax(
      Tensor::from_data({3}, {std::log(1.0), std::log(2.0), std::log(3.0)}), 0);
  CHECK(ln.data()[0] == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(ln.data()[1] == doctest::Approx(2.0 / 6).epsilon(1e-12));
  CHECK(ln.data()[2] == doctest::Approx(3.0 / 6).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and permutation equivariance") {
  std::mt19937_64 rng(7);
  auto x = Tensor::uniform({4, 6}, -5, 5, rng);
  auto y = softmax(x, 1);
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 6; ++c) s += y.at({r, c});
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
  // permute columns of input -> same permutation of output
  std::vector<std::size_t> perm = {3, 1, 5, 0, 2, 4};
  std::vector<double> px(24);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 6; ++c) px[r * 6 + c] = x.at({r, perm[c]});
  auto yp = softmax(Tensor::from_data({4, 6}, px), 1);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(yp.at({r, c}) == doctest::Approx(y.at({r, perm[c]})).epsilon(1e-15));
}

TEST_CASE("concat shapes from the feature pipeline") {
  auto z = Tensor::zeros({2, 28, 28, 128});
  auto p = Tensor::zeros({2, 28, 28, 20});
  CHECK(concat({z, p}, 3).shape() == Shape{2, 28, 28, 148});

  auto ps = Tensor::zeros({1, 28, 28, 10});
  auto pt = Tensor::zeros({16, 1, 1, 10});
  CHECK(concat({ps, pt}, 3).shape() == Shape{16, 28, 28, 20});

  auto one = Tensor::from_data({3}, {1, 2, 3});
  auto same = concat({one}, 0);
  CHECK(same.shape() == Shape{3});
  CHECK(std::equal(same.data().begin(), same.data().end(), one.data().begin()));

  CHECK_THROWS_AS(concat({Tensor::zeros({2, 3}), Tensor::zeros({4, 3})}, 1),
                  std::invalid_argument);
}

TEST_CASE("concat then split is the identity") {
  std::mt19937_64 rng(11);
  auto a = Tensor::uniform({3, 4}, -1, 1, rng);
  auto b = Tensor::uniform({3, 2}, -1, 1, rng);
  auto c = concat({a, b}, 1);
  auto sa = slice(c, 1, 0, 4);
  auto sb = slice(c, 1, 4, 2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(sa.data()[i] == a.data()[i]);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(sb.data()[i] == b.data()[i]);
}

TEST_CASE("max pooling") {
  auto x = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  auto p = pool_max(x, {2, 2}, {2, 2});
  CHECK(p.shape() == Shape{1, 1});
  CHECK(p.data()[0] == 4);

  auto big = Tensor::zeros({4, 28, 28, 3});
  CHECK(pool_max(big, {1, 2, 2, 1}, {1, 2, 2, 1}).shape() ==
        Shape{4, 14, 14, 3});

  auto c = Tensor::full({3, 3}, 7.0);
  auto pc = pool_max(c, {3, 1}, {3, 1});
  for (double v : pc.data()) CHECK(v == 7.0);

  CHECK_THROWS_AS(pool_max(x, {3, 3}, {1, 1}), std::invalid_argument);
}

TEST_CASE("max pool gradient routes to first argmax on ties") {
  auto x = Tensor::from_data({2, 2}, {5, 5, 1, 5}, true);
  sum(pool_max(x, {2, 2}, {2, 2})).backward();
  CHECK(x.grad()[0] == 1);
  CHECK(x.grad()[1] == 0);
  CHECK(x.grad()[3] == 0);
}

TEST_CASE("backward on sum(w*x) gives x") {
  auto w = Tensor::from_data({3}, {0.5, -1, 2}, true);
  auto x = Tensor::from_data({3}, {3, 4, 5});
  sum(mul(w, x)).backward();
  CHECK(w.grad()[0] == 3);
  CHECK(w.grad()[1] == 4);
  CHECK(w.grad()[2] == 5);
}

TEST_CASE("backward rejects non-scalar and accumulates on repeat") {
  auto x = Tensor::from_data({2}, {1, 2}, true);
  CHECK_THROWS_AS(x.backward(), std::invalid_argument);
  auto loss = sum(x);
  loss.backward();
  loss.backward();
  CHECK(x.grad()[0] == 2);  // accumulated
  x.zero_grad();
  sum(x).backward();
  CHECK(x.grad()[0] == 1);
}

TEST_CASE("finite difference oracle over random composed graphs") {
  std::mt19937_64 rng(42);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto a = Tensor::uniform({3, 4}, -1, 1, rng, true);
    auto b = Tensor::uniform({4, 2}, -1, 1, rng, true);
    auto c = Tensor::uniform({3, 2}, -1, 1, rng, true);
    auto build = [&]() {
      auto m = matmul(a, b);
      auto r = relu(add(m, c));
      auto s = softmax(sub(m, scale(c, 0.5)), 1);
      auto cat = concat({r, s}, 1);
      auto pooled = pool_max(cat, {1, 2}, {1, 2});
      return mean(mul(pooled, pooled));
    };
    auto res = testsup::grad_check(build, {a, b, c}, 4, 1e-5, rng);
    worst = std::max(worst, res.max_rel_err);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("finite differences cover remaining ops") {
  std::mt19937_64 rng(43);
  auto x = Tensor::uniform({2, 6}, 0.1, 2.0, rng, true);
  auto g = Tensor::uniform({6}, 0.5, 1.5, rng, true);
  auto bt = Tensor::uniform({6}, -0.5, 0.5, rng, true);
  auto build = [&]() {
    auto ln = layer_norm(x, g, bt);
    auto lg = log_op(add(mul(x, x), Tensor::full({2, 6}, 0.5)));
    auto pm = permute(concat({ln, lg}, 0), {1, 0});
    auto av = pool_avg(pm, {2, 2}, {2, 2});
    return mean(av);
  };
  auto res = testsup::grad_check(build, {x, g, bt}, 12, 1e-5, rng);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("non-finite results are rejected") {
  auto x = Tensor::from_data({1}, {1e308});
  CHECK_THROWS_AS(mul(x, x), std::runtime_error);
  CHECK_THROWS_AS(Tensor::from_data({1}, {std::nan("")}), std::runtime_error);
}

TEST_CASE("deterministic forward") {
  std::mt19937_64 rng(5);
  auto a = Tensor::uniform({8, 8}, -2, 2, rng);
  auto r1 = softmax(matmul(a, a), 1);
  auto r2 = softmax(matmul(a, a), 1);
  CHECK(std::equal(r1.data().begin(), r1.data().end(), r2.data().begin()));
}

TEST_CASE("frozen parameter gradients are still computed but flagged") {
  std::mt19937_64 rng(1);
  Parameter p("theta", Tensor::uniform({3}, -1, 1, rng, true), true);
  CHECK(p.frozen);
  sum(p.tensor).backward();
  CHECK(p.tensor.grad()[0] == 1);
}
