// SPDX-License-Identifier: Apache-2.0
//
// Training losses and evaluation metrics. Positions are [T x N x 2] in field
// units, masks [T x N], state rows [T x S].
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "trajset/masking.hpp"
#include "trajset/tensor.hpp"

namespace trajset {

inline constexpr double kCrossEntropyLogFloor = 1e-12;

/// Weighted mean displacement: sum ||x^ - x|| * w / sum w. Differentiable in
/// the predictions and the weights. Throws when the weights sum to zero.
Tensor ade_loss(const Tensor& predictions, std::span<const double> truth, const Tensor& weights);

/// -(1/T) sum_t sum_c s[t][c] log(max(s^[t][c], 1e-12)).
Tensor ce_loss(std::span<const double> truth, const Tensor& predicted);

struct LossReport {
  double l_ade = 0.0;
  double l_ce = 0.0;
  double total = 0.0;
  double w1_value = 0.0;
};

struct TotalLoss {
  Tensor total;
  LossReport report;
};

/// L = L_ADE + lambda * L_CE. With lambda == 0 (or no state targets) the CE
/// term is not evaluated at all.
TotalLoss total_loss(const Tensor& predictions, std::span<const double> truth,
                     const Tensor& weights, std::span<const double> states,
                     const Tensor& state_scores, double lambda, double w1_value);

/// One-hot [T x S] rows from integer labels.
std::vector<double> one_hot(std::span<const int> labels, std::size_t classes);

// Metrics on plain arrays.

/// Mean displacement over hidden, non-NaN slots.
double ade_metric(std::span<const double> predicted, std::span<const double> truth,
                  const ObservationMask& m, const BinaryGrid* nan = nullptr);

/// Mean over agents with >= 1 evaluated slot of the error at that agent's
/// last hidden frame.
double fde_metric(std::span<const double> predicted, std::span<const double> truth,
                  const ObservationMask& m, const BinaryGrid* nan = nullptr);

struct MaxErrResult {
  double value = 0.0;
  std::size_t d_count = 0;
};

/// (1/D) sum_n max_t ||x^ - x|| m[t][n], D = agents with a hidden slot.
MaxErrResult max_err_metric(std::span<const double> predicted, std::span<const double> truth,
                            const ObservationMask& m, const BinaryGrid* nan = nullptr);

/// Fraction of frames where argmax matches; ties go to the lowest class.
double accuracy_metric(std::span<const double> truth, std::span<const double> predicted,
                       std::size_t classes);

std::size_t argmax_row(std::span<const double> row);

}  // namespace trajset
