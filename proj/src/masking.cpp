// SPDX-License-Identifier: Apache-2.0
#include "trajset/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "trajset/error.hpp"
#include "trajset/log.hpp"

namespace trajset {

std::size_t BinaryGrid::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

std::size_t BinaryGrid::column_count(std::size_t c) const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows_; ++r) n += at(r, c);
  return n;
}

const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kForecasting: return "forecasting";
    case TaskKind::kImputation: return "imputation";
    case TaskKind::kInference: return "inference";
    case TaskKind::kMixed: return "mixed";
  }
  return "unknown";
}

namespace {

void check_agents(const std::vector<std::size_t>& agents, std::size_t n) {
  for (auto a : agents) {
    if (a >= n) {
      throw TaskError("agent index " + std::to_string(a) + " out of range for " +
                      std::to_string(n) + " agents");
    }
  }
}

}  // namespace

ObservationMask build_forecasting_mask(std::size_t frames, std::size_t t_hat,
                                       const std::vector<std::size_t>& predicted_agents,
                                       std::size_t agents) {
  if (t_hat == 0 || t_hat >= frames) {
    throw TaskError("forecasting needs 0 < t_hat < T (t_hat=" + std::to_string(t_hat) +
                    ", T=" + std::to_string(frames) + ")");
  }
  check_agents(predicted_agents, agents);
  ObservationMask m(frames, agents);
  for (auto a : predicted_agents)
    for (std::size_t t = t_hat; t < frames; ++t) m.set(t, a, true);
  return m;
}

ObservationMask build_imputation_mask(std::size_t frames, std::size_t agents,
                                      const std::vector<std::size_t>& predicted_agents,
                                      const std::vector<Slot>& visible_slots) {
  check_agents(predicted_agents, agents);
  ObservationMask m(frames, agents);
  for (auto a : predicted_agents)
    for (std::size_t t = 0; t < frames; ++t) m.set(t, a, true);
  for (const auto& s : visible_slots) {
    if (s.frame >= frames || s.agent >= agents) throw TaskError("visible slot out of range");
    m.set(s.frame, s.agent, false);
  }
  for (auto a : predicted_agents) {
    if (m.column_count(a) == frames) {
      throw TaskError("imputation: agent " + std::to_string(a) +
                      " has no visible slot (that is inference)");
    }
  }
  return m;
}

ObservationMask build_inference_mask(std::size_t frames,
                                     const std::vector<std::size_t>& hidden_agents,
                                     std::size_t agents) {
  if (hidden_agents.empty()) throw TaskError("inference needs at least one hidden agent");
  check_agents(hidden_agents, agents);
  ObservationMask m(frames, agents);
  for (auto a : hidden_agents)
    for (std::size_t t = 0; t < frames; ++t) m.set(t, a, true);
  if (m.count() == frames * agents) {
    log_warning("inference mask hides every agent; the model sees no observations");
  }
  return m;
}

ObservationMask build_percentage_mask(std::size_t frames, std::size_t agents,
                                      std::size_t agent, double fraction,
                                      std::uint64_t rng_seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw TaskError("fraction must lie in [0, 1]");
  check_agents({agent}, agents);
  // Guard against products such as 0.9 * 60 landing just below an integer.
  const auto hidden = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(frames) + 1e-9));
  std::vector<std::size_t> order(frames);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(rng_seed);
  // Partial Fisher-Yates with an explicit draw so the result does not depend
  // on the standard library's shuffle.
  for (std::size_t i = 0; i < hidden; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (frames - i));
    std::swap(order[i], order[j]);
  }
  ObservationMask m(frames, agents);
  for (std::size_t i = 0; i < hidden; ++i) m.set(order[i], agent, true);
  return m;
}

namespace {

void check_positions(std::span<const double> positions, std::size_t frames,
                     std::size_t agents, std::size_t ball_index) {
  if (positions.size() != frames * agents * 2) {
    throw ShapeError("positions must be [T x N x 2]");
  }
  if (ball_index >= agents) throw TaskError("ball index out of range");
}

}  // namespace

ObservationMask build_circle_mask(std::span<const double> positions, std::size_t frames,
                                  std::size_t agents, std::size_t ball_index, double radius) {
  check_positions(positions, frames, agents, ball_index);
  ObservationMask m(frames, agents);
  for (std::size_t t = 0; t < frames; ++t) {
    const double bx = positions[(t * agents + ball_index) * 2];
    const double by = positions[(t * agents + ball_index) * 2 + 1];
    for (std::size_t n = 0; n < agents; ++n) {
      if (n == ball_index) continue;
      const double dx = positions[(t * agents + n) * 2] - bx;
      const double dy = positions[(t * agents + n) * 2 + 1] - by;
      m.set(t, n, std::hypot(dx, dy) > radius);
    }
  }
  return m;
}

ObservationMask build_camera_mask(std::span<const double> positions, std::size_t frames,
                                  std::size_t agents, std::size_t ball_index,
                                  double half_angle_deg, std::array<double, 2> camera_xy) {
  check_positions(positions, frames, agents, ball_index);
  if (!(half_angle_deg > 0.0 && half_angle_deg < 90.0)) {
    throw TaskError("camera half angle must lie in (0, 90) degrees");
  }
  const double limit = half_angle_deg * std::numbers::pi / 180.0;
  ObservationMask m(frames, agents);
  for (std::size_t t = 0; t < frames; ++t) {
    const double bx = positions[(t * agents + ball_index) * 2] - camera_xy[0];
    const double by = positions[(t * agents + ball_index) * 2 + 1] - camera_xy[1];
    if (bx == 0.0 && by == 0.0) {
      log_warning("camera mask: ball on the camera point at frame " + std::to_string(t) +
                  "; frame left fully visible");
      continue;
    }
    for (std::size_t n = 0; n < agents; ++n) {
      if (n == ball_index) continue;
      const double ax = positions[(t * agents + n) * 2] - camera_xy[0];
      const double ay = positions[(t * agents + n) * 2 + 1] - camera_xy[1];
      if (ax == 0.0 && ay == 0.0) continue;
      const double angle = std::abs(std::atan2(ax * by - ay * bx, ax * bx + ay * by));
      m.set(t, n, angle > limit);
    }
  }
  return m;
}

ExtendedMask extend_mask_with_cls(const ObservationMask& m) {
  ExtendedMask e(m.rows(), m.cols() + 1);
  for (std::size_t t = 0; t < m.rows(); ++t) {
    for (std::size_t n = 0; n < m.cols(); ++n) e.set(t, n, m.at(t, n) != 0);
    e.set(t, m.cols(), true);
  }
  return e;
}

ObservationMask combine_masks(const ObservationMask& a, const ObservationMask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("mask shape mismatch");
  ObservationMask out(a.rows(), a.cols());
  for (std::size_t t = 0; t < a.rows(); ++t)
    for (std::size_t n = 0; n < a.cols(); ++n) out.set(t, n, a.at(t, n) || b.at(t, n));
  return out;
}

TaskKind validate_task(const ObservationMask& m) {
  const std::size_t frames = m.frames();
  const std::size_t agents = m.agents();
  std::size_t fully_hidden = 0, partial = 0;
  for (std::size_t n = 0; n < agents; ++n) {
    const std::size_t c = m.column_count(n);
    if (c == frames && frames > 0) {
      ++fully_hidden;
    } else if (c > 0) {
      ++partial;
    }
  }
  if (fully_hidden > 0) return partial == 0 ? TaskKind::kInference : TaskKind::kMixed;

  // Forecasting: every predicted column is exactly 0 before a shared t_hat
  // and 1 from t_hat on.
  if (partial > 0) {
    std::size_t t_hat = frames;
    bool ok = true;
    for (std::size_t n = 0; n < agents && ok; ++n) {
      const std::size_t c = m.column_count(n);
      if (c == 0) continue;
      const std::size_t start = frames - c;
      if (t_hat == frames) t_hat = start;
      if (start != t_hat) ok = false;
      for (std::size_t t = start; t < frames && ok; ++t) ok = m.at(t, n) != 0;
    }
    if (ok && t_hat > 0 && t_hat < frames) return TaskKind::kForecasting;
  }
  // Every predicted agent retains a visible slot (vacuously true when nothing
  // is hidden).
  return TaskKind::kImputation;
}

std::vector<UncertaintyRole> uncertainty_roles(const ObservationMask& m) {
  const std::size_t frames = m.frames(), agents = m.agents();
  std::vector<UncertaintyRole> roles(frames * agents, UncertaintyRole::kNone);
  // Two sweeps per column give the distance to the nearest hidden slot.
  constexpr std::size_t kFar = 3;
  std::vector<std::size_t> dist(frames);
  for (std::size_t n = 0; n < agents; ++n) {
    std::size_t since = kFar;
    for (std::size_t t = 0; t < frames; ++t) {
      since = m.at(t, n) ? 0 : std::min(since + 1, kFar);
      dist[t] = since;
    }
    since = kFar;
    for (std::size_t t = frames; t-- > 0;) {
      since = m.at(t, n) ? 0 : std::min(since + 1, kFar);
      dist[t] = std::min(dist[t], since);
    }
    for (std::size_t t = 0; t < frames; ++t) {
      auto& r = roles[t * agents + n];
      switch (dist[t]) {
        case 0: r = UncertaintyRole::kHidden; break;
        case 1: r = UncertaintyRole::kNeighbor; break;
        case 2: r = UncertaintyRole::kSecondNeighbor; break;
        default: r = UncertaintyRole::kNone; break;
      }
    }
  }
  return roles;
}

double default_uncertainty_theta() { return std::log(3.0); }

double uncertainty_w1(double theta) {
  double s;
  if (theta >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-theta));
  } else {
    const double e = std::exp(theta);
    s = e / (1.0 + e);
  }
  return std::clamp(s, kUncertaintyWeightFloor, 1.0 - kUncertaintyWeightFloor);
}

namespace {

double role_weight(UncertaintyRole r, double w1) {
  switch (r) {
    case UncertaintyRole::kHidden: return 1.0;
    case UncertaintyRole::kNeighbor: return w1;
    case UncertaintyRole::kSecondNeighbor: return 1.0 - w1;
    case UncertaintyRole::kNone: return 0.0;
  }
  return 0.0;
}

}  // namespace

UncertaintyMask build_uncertainty_mask(const ObservationMask& m, double theta) {
  UncertaintyMask u;
  u.frames = m.frames();
  u.agents = m.agents();
  u.theta = theta;
  u.w1 = uncertainty_w1(theta);
  u.w2 = 1.0 - u.w1;
  u.roles = uncertainty_roles(m);
  u.entries.resize(u.roles.size());
  for (std::size_t i = 0; i < u.roles.size(); ++i) u.entries[i] = role_weight(u.roles[i], u.w1);
  return u;
}

Tensor uncertainty_weights(const std::vector<UncertaintyRole>& roles, std::size_t frames,
                           std::size_t agents, const Tensor& theta, const BinaryGrid* exclude) {
  if (roles.size() != frames * agents) throw ShapeError("roles must be [T x N]");
  if (theta.numel() != 1) throw ShapeError("theta must be a scalar");
  if (exclude && (exclude->rows() != frames || exclude->cols() != agents)) {
    throw ShapeError("exclusion grid must be [T x N]");
  }
  const double w1 = uncertainty_w1(theta.item());
  std::vector<UncertaintyRole> effective = roles;
  if (exclude) {
    for (std::size_t i = 0; i < effective.size(); ++i) {
      if (exclude->bits()[i]) effective[i] = UncertaintyRole::kNone;
    }
  }
  std::vector<double> values(effective.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = role_weight(effective[i], w1);

  Tape* tape = theta.requires_grad() ? active_tape() : nullptr;
  Tensor out({frames, agents}, std::move(values), tape != nullptr);
  if (tape) {
    auto tn = theta.node();
    auto on = out.node();
    tape->record({tn}, on, [tn, on, effective = std::move(effective), w1] {
      const double dw1 = w1 * (1.0 - w1);
      double g = 0.0;
      for (std::size_t i = 0; i < effective.size(); ++i) {
        if (effective[i] == UncertaintyRole::kNeighbor) g += on->grad[i] * dw1;
        if (effective[i] == UncertaintyRole::kSecondNeighbor) g -= on->grad[i] * dw1;
      }
      tn->ensure_grad();
      tn->grad[0] += g;
    });
  }
  return out;
}

Tensor binary_weights(const ObservationMask& m, const BinaryGrid* exclude) {
  std::vector<double> values(m.rows() * m.cols());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool excluded = exclude && exclude->bits()[i];
    values[i] = (m.bits()[i] && !excluded) ? 1.0 : 0.0;
  }
  return Tensor({m.rows(), m.cols()}, std::move(values));
}

}  // namespace trajset
