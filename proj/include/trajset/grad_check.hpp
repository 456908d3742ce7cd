// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference oracle for the autodiff engine.
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "trajset/tensor.hpp"

namespace trajset {

/// Denominator floor for relative errors, so entries where both gradients
/// are at round-off level do not dominate the report.
inline constexpr double kGradCheckAbsFloor = 1e-6;

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t entries = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  bool passed = false;
};

double relative_error(double analytic, double numeric);

/// Checks a scalar function of one tensor at x.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double step, double tol);

/// Checks a scalar function of several leaf tensors (e.g. model parameters).
/// Leaves are perturbed in place and restored. `stride` > 1 samples every
/// stride-th entry of each leaf.
GradCheckReport grad_check_leaves(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                                  double step, double tol, std::size_t stride = 1);

}  // namespace trajset
