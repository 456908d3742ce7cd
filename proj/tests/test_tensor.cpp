// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "trajset/error.hpp"
#include "trajset/grad_check.hpp"
#include "trajset/init.hpp"
#include "trajset/ops.hpp"

using namespace trajset;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = nd(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

// y = 2x with a backward rule that reports 3.
Tensor broken_double(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * x.values()[i];
  Tensor y(x.shape(), out, x.requires_grad());
  if (Tape* tape = active_tape(); tape && x.requires_grad()) {
    auto xn = x.node(), yn = y.node();
    tape->record({xn}, yn, [xn, yn] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < yn->grad.size(); ++i) xn->grad[i] += 3.0 * yn->grad[i];
    });
  }
  return y;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("matmul examples") {
  Tensor id({2, 2}, {1, 0, 0, 1});
  Tensor b({2, 2}, {5, 6, 7, 8});
  auto c = matmul(id, b);
  CHECK(std::vector<double>(c.values().begin(), c.values().end()) == std::vector<double>{5, 6, 7, 8});

  Tensor a({1, 2}, {1, 2}, true);
  Tensor col({2, 1}, {3, 4});
  Tape tape;
  TapeScope scope(tape);
  auto r = matmul(a, col);
  CHECK(r.item() == doctest::Approx(11.0));
  tape.backward(sum(r));
  CHECK(a.grad()[0] == doctest::Approx(3.0));
  CHECK(a.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("matmul rejects mismatched inner dims") {
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("softmax rows") {
  auto s = softmax_rows(Tensor({3, 2}, {0, 0, 1, 0, 1000, 0}));
  CHECK(s.at({0, 0}) == doctest::Approx(0.5));
  CHECK(s.at({1, 0}) == doctest::Approx(0.73106).epsilon(1e-5));
  CHECK(s.at({1, 1}) == doctest::Approx(0.26894).epsilon(1e-5));
  CHECK(s.at({2, 0}) == doctest::Approx(1.0));
  CHECK(std::isfinite(s.at({2, 1})));
}

TEST_CASE("layer norm") {
  Tensor g = Tensor::full({2}, 1.0), b = Tensor::zeros({2});
  auto y = layer_norm(Tensor({1, 2}, {1, 3}), g, b);
  CHECK(y.at({0, 0}) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(y.at({0, 1}) == doctest::Approx(1.0).epsilon(1e-4));
  auto z = layer_norm(Tensor({1, 2}, {4, 4}), g, b);
  CHECK(z.at({0, 0}) == 0.0);
  CHECK(z.at({0, 1}) == 0.0);

  Tensor x = random_tensor({2, 4}, 1);
  Tensor gain = random_tensor({4}, 2), bias = random_tensor({4}, 3);
  auto rep = grad_check_leaves(
      [&] { return sum(mul(layer_norm(x, gain, bias), random_tensor({2, 4}, 4, false))); },
      {x, gain, bias}, 1e-5, 1e-4);
  CHECK(rep.passed);
}

TEST_CASE("affine") {
  Tensor x({1, 2}, {1, 1});
  Tensor w({2, 2}, {1, 0, 0, 1});
  auto y = affine(x, w, Tensor({2}, {1, 1}));
  CHECK(y.at({0, 0}) == 2.0);
  CHECK(y.at({0, 1}) == 2.0);

  Tensor xr = random_tensor({3, 2}, 5), wr = random_tensor({2, 5}, 6), br = random_tensor({5}, 7);
  Tensor probe = random_tensor({3, 5}, 8, false);
  auto rep = grad_check_leaves([&] { return sum(mul(affine(xr, wr, br), probe)); },
                               {xr, wr, br}, 1e-5, 1e-4);
  CHECK(rep.passed);
}

TEST_CASE("elementwise and layout") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);

  Tensor a = random_tensor({2, 3}, 9, false), b = random_tensor({2, 4}, 10, false);
  auto parts = split(concat({a, b}, 1), 1, {3, 4});
  CHECK(std::equal(parts[0].values().begin(), parts[0].values().end(), a.values().begin()));
  CHECK(std::equal(parts[1].values().begin(), parts[1].values().end(), b.values().begin()));

  Tensor x({2}, {-1.0, 2.0}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(relu(x)));
  }
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);

  auto t = transpose(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), 0, 1);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.at({2, 1}) == 6.0);
  CHECK_THROWS_AS(reshape(Tensor::zeros({2, 3}), {4}), ShapeError);
}

TEST_CASE("ops reject non-finite results") {
  Tensor x({1}, {0.0});
  CHECK_THROWS_AS(div(Tensor::scalar(1.0), x), NumericError);
}

TEST_CASE("backward basics") {
  Tensor p({3}, {0.5, -2, 7}, true);
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(p));
  }
  for (double g : p.grad()) CHECK(g == 1.0);

  Tensor q({2}, {1, 2}, true);
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(mul(q, q)));
  }
  CHECK(q.grad()[0] == doctest::Approx(2.0));
  CHECK(q.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("gradients accumulate across backward calls") {
  Tensor p({1}, {3.0}, true);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(scale(p, 2.0)));
  }
  CHECK(p.grad()[0] == 4.0);
  p.zero_grad();
  CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("grad_check") {
  Tensor x = random_tensor({4}, 11);
  auto plain = grad_check([](const Tensor& t) { return sum(t); }, x, 1e-5, 1e-4);
  CHECK(plain.passed);
  CHECK(plain.max_rel_error < 1e-9);

  Tensor v = random_tensor({1, 4}, 12);
  auto soft = grad_check(
      [](const Tensor& t) {
        auto s = softmax_rows(t);
        return sum(mul(s, s));
      },
      v, 1e-5, 1e-4);
  CHECK(soft.passed);

  auto broken = grad_check([](const Tensor& t) { return sum(broken_double(t)); }, x, 1e-5, 1e-4);
  CHECK_FALSE(broken.passed);
}

TEST_CASE("xavier normal init") {
  auto sample_var = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  };
  Rng rng(42);
  CHECK(sample_var(xavier_normal_init(1, 1, 100000, rng)) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(sample_var(xavier_normal_init(128, 512, 100000, rng)) ==
        doctest::Approx(2.0 / 640.0).epsilon(0.05));
  CHECK(xavier_normal_init(8, 8, 7) == xavier_normal_init(8, 8, 7));
  CHECK(xavier_normal_init(8, 8, 7) != xavier_normal_init(8, 8, 8));
}

}
