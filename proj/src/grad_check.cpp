// SPDX-License-Identifier: Apache-2.0
#include "trajset/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "trajset/error.hpp"

namespace trajset {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckAbsFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double step, double tol) {
  Tensor leaf = x.clone();
  leaf.set_requires_grad(true);
  return grad_check_leaves([&] { return f(leaf); }, {leaf}, step, tol);
}

GradCheckReport grad_check_leaves(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                                  double step, double tol, std::size_t stride) {
  if (stride == 0) stride = 1;
  for (auto& l : leaves) {
    l.set_requires_grad(true);
    l.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor y = f();
    tape.backward(y);
  }

  GradCheckReport report;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    auto vals = leaf.mutable_values();
    for (std::size_t i = 0; i < vals.size(); i += stride) {
      const double orig = vals[i];
      vals[i] = orig + step;
      const double fp = f().item();
      vals[i] = orig - step;
      const double fm = f().item();
      vals[i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double rel = relative_error(analytic[i], numeric);
      report.max_abs_error = std::max(report.max_abs_error, std::abs(analytic[i] - numeric));
      if (rel > report.max_rel_error || report.entries == 0) {
        report.max_rel_error = std::max(rel, report.max_rel_error);
        report.worst_tensor = li;
        report.worst_index = i;
      }
      ++report.entries;
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace trajset
