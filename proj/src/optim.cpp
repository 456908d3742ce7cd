// SPDX-License-Identifier: Apache-2.0
#include "trajset/optim.hpp"

#include <algorithm>
#include <cmath>

#include "trajset/error.hpp"

namespace trajset {

AdamWState AdamWState::for_params(const ParameterSet& params) {
  AdamWState s;
  for (const auto& p : params.items()) {
    s.m.emplace_back(p.tensor.numel(), 0.0);
    s.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

void adamw_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                  std::span<double> v, std::size_t t, const AdamWConfig& cfg) {
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
    throw ShapeError("adamw_update: parameter, gradient and moment sizes differ");
  }
  if (t == 0) throw ContractError("adamw_update: step counter is 1-based");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const double shrink = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] *= shrink;
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void adamw_step(ParameterSet& params, AdamWState& state, const AdamWConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adamw_step: optimizer state does not match the parameters");
  }
  for (const auto& p : params.items()) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adamw_step aborted: non-finite gradient in " + p.name);
      }
    }
  }
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params.items()[i].tensor;
    if (!t.has_grad()) continue;
    adamw_update(t.mutable_values(), t.grad(), state.m[i], state.v[i], state.step, cfg);
  }
}

double lr_schedule(std::size_t epoch, double lr0, double factor, std::size_t every) {
  if (every == 0) throw ConfigError("lr decay interval must be positive");
  return lr0 * std::pow(factor, static_cast<double>(epoch / every));
}

double global_grad_norm(const ParameterSet& params) {
  double sq = 0.0;
  for (const auto& p : params.items())
    for (double g : p.tensor.grad()) sq += g * g;
  return std::sqrt(sq);
}

double clip_gradients(ParameterSet& params, double threshold, ClipMode mode) {
  if (!(threshold > 0.0)) throw ConfigError("clip threshold must be positive");
  const double norm = global_grad_norm(params);
  for (const auto& p : params.items()) {
    Tensor t = p.tensor;
    if (!t.has_grad()) continue;
    auto g = t.mutable_grad();
    if (mode == ClipMode::kGlobalNorm) {
      if (norm > threshold) {
        const double s = threshold / norm;
        for (double& x : g) x *= s;
      }
    } else {
      for (double& x : g) x = std::clamp(x, -threshold, threshold);
    }
  }
  return norm;
}

void clear_gradients(ParameterSet& params) {
  for (const auto& p : params.items()) p.tensor.node()->grad.clear();
}

}  // namespace trajset
