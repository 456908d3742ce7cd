// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "trajset/error.hpp"
#include "trajset/objectives.hpp"

using namespace trajset;

TEST_SUITE("objectives") {

TEST_CASE("ade loss") {
  Tensor pred({1, 1, 2}, {3, 4});
  CHECK(ade_loss(pred, std::vector<double>{0, 0}, Tensor({1, 1}, {1})).item() == doctest::Approx(5.0));
  CHECK(ade_loss(pred, std::vector<double>{3, 4}, Tensor({1, 1}, {1})).item() == 0.0);

  Tensor two({2, 1, 2}, {3, 4, 1, 1});
  auto l = ade_loss(two, std::vector<double>{0, 0, 1, 1}, Tensor({2, 1}, {1, 0.8}));
  CHECK(l.item() == doctest::Approx(5.0 / 1.8));
  CHECK(l.item() == doctest::Approx(2.7778).epsilon(1e-4));
  CHECK_THROWS_AS(ade_loss(pred, std::vector<double>{0, 0}, Tensor({1, 1}, {0})), NumericError);
}

TEST_CASE("cross entropy") {
  std::vector<double> truth{1, 0, 0, 0};
  CHECK(ce_loss(truth, Tensor({1, 4}, {0.25, 0.25, 0.25, 0.25})).item() ==
        doctest::Approx(std::log(4.0)));
  CHECK(ce_loss(truth, Tensor({1, 4}, {1, 0, 0, 0})).item() == 0.0);
  const double clamped = ce_loss(truth, Tensor({1, 4}, {0, 1, 0, 0})).item();
  CHECK(std::isfinite(clamped));
  CHECK(clamped == doctest::Approx(-std::log(kCrossEntropyLogFloor)));
}

TEST_CASE("total loss") {
  Tensor pred({1, 1, 2}, {1, 0});
  std::vector<double> truth{0, 0};
  Tensor w({1, 1}, {1});
  auto states = one_hot(std::vector<int>{0}, 4);
  // -ln p0 = 0.5
  const double p0 = std::exp(-0.5);
  Tensor scores({1, 4}, {p0, (1 - p0) / 3, (1 - p0) / 3, (1 - p0) / 3});
  auto r = total_loss(pred, truth, w, states, scores, 4.0, 0.75);
  CHECK(r.report.l_ade == doctest::Approx(1.0));
  CHECK(r.report.l_ce == doctest::Approx(0.5));
  CHECK(r.report.total == doctest::Approx(3.0));
  auto none = total_loss(pred, truth, w, states, scores, 0.0, 0.75);
  CHECK(none.report.total == none.report.l_ade);
  CHECK_THROWS_AS(total_loss(pred, truth, w, states, scores, -1.0, 0.75), ConfigError);
}

TEST_CASE("ade metric") {
  ObservationMask m(2, 2);
  m.set(0, 0, true);
  m.set(1, 0, true);
  std::vector<double> truth(8, 0.0);
  std::vector<double> pred{3, 0, 100, 100, 0, 4, 50, 50};
  CHECK(ade_metric(pred, truth, m) == doctest::Approx(3.5));
  CHECK(ade_metric(truth, truth, m) == 0.0);
  CHECK_THROWS_AS(ade_metric(pred, truth, ObservationMask(2, 2)), TaskError);
}

TEST_CASE("fde metric") {
  ObservationMask m(3, 2);
  for (std::size_t n = 0; n < 2; ++n) m.set(2, n, true);
  std::vector<double> truth(12, 0.0), pred(12, 0.0);
  pred[(2 * 2 + 0) * 2] = 2;
  pred[(2 * 2 + 1) * 2] = 4;
  CHECK(fde_metric(pred, truth, m) == doctest::Approx(3.0));
  CHECK(fde_metric(truth, truth, m) == 0.0);
}

TEST_CASE("max error metric") {
  ObservationMask m(3, 1, 1);
  std::vector<double> truth(6, 0.0);
  std::vector<double> pred{1.0, 0, 2.5, 0, 0.5, 0};
  auto r = max_err_metric(pred, truth, m);
  CHECK(r.value == doctest::Approx(2.5));
  CHECK(r.d_count == 1);

  ObservationMask two(1, 2, 1);
  auto r2 = max_err_metric(std::vector<double>{2, 0, 0, 4}, std::vector<double>(4, 0.0), two);
  CHECK(r2.value == doctest::Approx(3.0));
  CHECK_THROWS_AS(max_err_metric(pred, truth, ObservationMask(3, 1)), TaskError);
}

TEST_CASE("accuracy metric") {
  auto s = one_hot(std::vector<int>{0, 1, 2, 3}, 4);
  CHECK(accuracy_metric(s, s, 4) == 1.0);
  auto p = one_hot(std::vector<int>{0, 1, 2, 0}, 4);
  CHECK(accuracy_metric(s, p, 4) == doctest::Approx(0.75));
  std::vector<double> uniform(16, 0.25);
  CHECK(accuracy_metric(s, uniform, 4) == doctest::Approx(0.25));
  CHECK(argmax_row(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == 0);
}

TEST_CASE("nan slots are ignored by metrics") {
  ObservationMask m(1, 2, 1);
  NanMask nan(1, 2);
  nan.set(0, 1, true);
  std::vector<double> truth(4, 0.0), pred{1, 0, 99, 0};
  CHECK(ade_metric(pred, truth, m, &nan) == doctest::Approx(1.0));
}

}
