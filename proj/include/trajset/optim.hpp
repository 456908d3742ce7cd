// SPDX-License-Identifier: Apache-2.0
//
// AdamW with decoupled weight decay, step learning-rate decay and gradient
// clipping.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "trajset/params.hpp"

namespace trajset {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-4;
  double weight_decay = 0.01;
};

/// First and second moments per parameter, plus the shared step counter.
struct AdamWState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;

  static AdamWState for_params(const ParameterSet& params);
  bool operator==(const AdamWState&) const = default;
};

/// One update of a single array at step t (1-based):
///   p <- p (1 - lr wd);  m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   p <- p - lr mhat / (sqrt(vhat) + eps)
void adamw_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                  std::span<double> v, std::size_t t, const AdamWConfig& cfg);

/// Applies one step to every parameter holding a gradient; parameters never
/// reached by the loss are left untouched. Throws NumericError, before
/// modifying anything, when a gradient is non-finite.
void adamw_step(ParameterSet& params, AdamWState& state, const AdamWConfig& cfg);

/// lr0 * factor^floor(epoch / every).
double lr_schedule(std::size_t epoch, double lr0, double factor = 0.5, std::size_t every = 20);

enum class ClipMode { kGlobalNorm, kValue };

double global_grad_norm(const ParameterSet& params);

/// Global-norm mode rescales all gradients by threshold / ||g|| when the norm
/// exceeds the threshold; value mode clamps each entry to [-threshold,
/// threshold]. Returns the norm before clipping.
double clip_gradients(ParameterSet& params, double threshold, ClipMode mode = ClipMode::kGlobalNorm);

/// Drops accumulated gradients so that unreached parameters read as empty.
void clear_gradients(ParameterSet& params);

}  // namespace trajset
