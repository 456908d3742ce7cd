// SPDX-License-Identifier: Apache-2.0
#include "trajset/objectives.hpp"

#include <cmath>

#include "trajset/error.hpp"
#include "trajset/ops.hpp"

namespace trajset {

Tensor ade_loss(const Tensor& predictions, std::span<const double> truth, const Tensor& weights) {
  if (predictions.rank() != 3 || predictions.dim(2) != 2) {
    throw ShapeError("ade_loss: predictions must be [T x N x 2]");
  }
  const std::size_t T = predictions.dim(0), N = predictions.dim(1);
  if (truth.size() != predictions.numel()) throw ShapeError("ade_loss: truth shape mismatch");
  if (weights.shape() != Shape{T, N}) throw ShapeError("ade_loss: weights must be [T x N]");
  double wsum = 0.0;
  for (double w : weights.values()) wsum += w;
  if (!(wsum > 0.0)) throw NumericError("ade_loss: weights sum to zero, loss undefined");

  Tensor target({T, N, 2}, std::vector<double>(truth.begin(), truth.end()));
  Tensor dist = row_norm(sub(predictions, target));  // [T x N]
  return div(sum(mul(dist, weights)), sum(weights));
}

Tensor ce_loss(std::span<const double> truth, const Tensor& predicted) {
  if (predicted.rank() != 2) throw ShapeError("ce_loss: predictions must be [T x S]");
  const std::size_t T = predicted.dim(0), S = predicted.dim(1);
  if (truth.size() != T * S) throw ShapeError("ce_loss: truth shape mismatch");
  for (std::size_t t = 0; t < T; ++t) {
    double row = 0.0;
    for (std::size_t c = 0; c < S; ++c) {
      const double s = truth[t * S + c];
      if (s < 0.0) throw DataError("ce_loss: negative target probability");
      row += s;
      if (predicted.values()[t * S + c] < 0.0) {
        throw DataError("ce_loss: negative predicted probability");
      }
    }
    if (std::abs(row - 1.0) > 1e-9) throw DataError("ce_loss: target row does not sum to 1");
  }
  Tensor target({T, S}, std::vector<double>(truth.begin(), truth.end()));
  Tensor logp = log_clamped(predicted, kCrossEntropyLogFloor);
  return scale(sum(mul(target, logp)), -1.0 / static_cast<double>(T));
}

TotalLoss total_loss(const Tensor& predictions, std::span<const double> truth,
                     const Tensor& weights, std::span<const double> states,
                     const Tensor& state_scores, double lambda, double w1_value) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  TotalLoss out;
  Tensor l_ade = ade_loss(predictions, truth, weights);
  out.report.l_ade = l_ade.item();
  out.report.w1_value = w1_value;
  if (lambda > 0.0 && state_scores.defined() && !states.empty()) {
    Tensor l_ce = ce_loss(states, state_scores);
    out.report.l_ce = l_ce.item();
    out.total = add(l_ade, scale(l_ce, lambda));
  } else {
    out.total = l_ade;
  }
  out.report.total = out.total.item();
  return out;
}

std::vector<double> one_hot(std::span<const int> labels, std::size_t classes) {
  std::vector<double> out(labels.size() * classes, 0.0);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] < 0 || static_cast<std::size_t>(labels[t]) >= classes) {
      throw DataError("state label " + std::to_string(labels[t]) + " out of range");
    }
    out[t * classes + static_cast<std::size_t>(labels[t])] = 1.0;
  }
  return out;
}

namespace {

void check_metric_shapes(std::span<const double> predicted, std::span<const double> truth,
                         const ObservationMask& m, const BinaryGrid* nan) {
  const std::size_t slots = m.rows() * m.cols();
  if (predicted.size() != slots * 2 || truth.size() != slots * 2) {
    throw ShapeError("metric: positions must be [T x N x 2] matching the mask");
  }
  if (nan && (nan->rows() != m.rows() || nan->cols() != m.cols())) {
    throw ShapeError("metric: NaN-mask shape mismatch");
  }
}

double slot_error(std::span<const double> a, std::span<const double> b, std::size_t slot) {
  return std::hypot(a[slot * 2] - b[slot * 2], a[slot * 2 + 1] - b[slot * 2 + 1]);
}

bool evaluated(const ObservationMask& m, const BinaryGrid* nan, std::size_t t, std::size_t n) {
  return m.at(t, n) && !(nan && nan->at(t, n));
}

}  // namespace

double ade_metric(std::span<const double> predicted, std::span<const double> truth,
                  const ObservationMask& m, const BinaryGrid* nan) {
  check_metric_shapes(predicted, truth, m, nan);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < m.rows(); ++t) {
    for (std::size_t n = 0; n < m.cols(); ++n) {
      if (!evaluated(m, nan, t, n)) continue;
      acc += slot_error(predicted, truth, t * m.cols() + n);
      ++count;
    }
  }
  if (count == 0) throw TaskError("ade_metric: no hidden slots to evaluate");
  return acc / static_cast<double>(count);
}

double fde_metric(std::span<const double> predicted, std::span<const double> truth,
                  const ObservationMask& m, const BinaryGrid* nan) {
  check_metric_shapes(predicted, truth, m, nan);
  double acc = 0.0;
  std::size_t agents = 0;
  for (std::size_t n = 0; n < m.cols(); ++n) {
    for (std::size_t t = m.rows(); t-- > 0;) {
      if (!evaluated(m, nan, t, n)) continue;
      acc += slot_error(predicted, truth, t * m.cols() + n);
      ++agents;
      break;
    }
  }
  if (agents == 0) throw TaskError("fde_metric: no agent has a hidden slot");
  return acc / static_cast<double>(agents);
}

MaxErrResult max_err_metric(std::span<const double> predicted, std::span<const double> truth,
                            const ObservationMask& m, const BinaryGrid* nan) {
  check_metric_shapes(predicted, truth, m, nan);
  MaxErrResult r;
  double acc = 0.0;
  for (std::size_t n = 0; n < m.cols(); ++n) {
    bool any = false;
    double mx = 0.0;
    for (std::size_t t = 0; t < m.rows(); ++t) {
      if (!evaluated(m, nan, t, n)) continue;
      any = true;
      mx = std::max(mx, slot_error(predicted, truth, t * m.cols() + n));
    }
    if (any) {
      acc += mx;
      ++r.d_count;
    }
  }
  if (r.d_count == 0) throw TaskError("max_err_metric: D = 0, no agent has a hidden slot");
  r.value = acc / static_cast<double>(r.d_count);
  return r;
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

double accuracy_metric(std::span<const double> truth, std::span<const double> predicted,
                       std::size_t classes) {
  if (classes == 0 || truth.size() != predicted.size() || truth.size() % classes != 0) {
    throw ShapeError("accuracy_metric: shape mismatch");
  }
  const std::size_t frames = truth.size() / classes;
  if (frames == 0) throw ShapeError("accuracy_metric: no frames");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    hits += argmax_row(truth.subspan(t * classes, classes)) ==
            argmax_row(predicted.subspan(t * classes, classes));
  }
  return static_cast<double>(hits) / static_cast<double>(frames);
}

}  // namespace trajset
