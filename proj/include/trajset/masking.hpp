// SPDX-License-Identifier: Apache-2.0
//
// Observation masks. All grids are time-major [T x N]; agent-wise predicates
// are evaluated on columns.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trajset/tensor.hpp"

namespace trajset {

/// Binary [rows x cols] grid, row-major.
class BinaryGrid {
 public:
  BinaryGrid() = default;
  BinaryGrid(std::size_t rows, std::size_t cols, std::uint8_t fill = 0)
      : rows_(rows), cols_(cols), bits_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c]; }
  void set(std::size_t r, std::size_t c, bool v) { bits_[r * cols_ + c] = v ? 1 : 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::size_t count() const;
  std::size_t column_count(std::size_t c) const;
  bool operator==(const BinaryGrid&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// 1 = hidden (to predict), 0 = visible.
struct ObservationMask : BinaryGrid {
  using BinaryGrid::BinaryGrid;
  std::size_t frames() const { return rows(); }
  std::size_t agents() const { return cols(); }
};

/// ObservationMask with the CLS column (all ones) appended as agent N.
struct ExtendedMask : BinaryGrid {
  using BinaryGrid::BinaryGrid;
};

/// 1 = observation absent or corrupt; excluded from attention keys, losses
/// and metrics.
struct NanMask : BinaryGrid {
  using BinaryGrid::BinaryGrid;
};

enum class TaskKind { kForecasting, kImputation, kInference, kMixed };
const char* to_string(TaskKind k);

ObservationMask build_forecasting_mask(std::size_t frames, std::size_t t_hat,
                                       const std::vector<std::size_t>& predicted_agents,
                                       std::size_t agents);

struct Slot {
  std::size_t frame;
  std::size_t agent;
};

/// Hides every slot of the predicted agents except the listed visible ones.
ObservationMask build_imputation_mask(std::size_t frames, std::size_t agents,
                                      const std::vector<std::size_t>& predicted_agents,
                                      const std::vector<Slot>& visible_slots);

/// Hides whole agents. Hiding every agent is permitted but logged.
ObservationMask build_inference_mask(std::size_t frames,
                                     const std::vector<std::size_t>& hidden_agents,
                                     std::size_t agents);

/// Hides floor(fraction * T) uniformly chosen frames of one agent.
ObservationMask build_percentage_mask(std::size_t frames, std::size_t agents,
                                      std::size_t agent, double fraction,
                                      std::uint64_t rng_seed);

/// positions: [T x N x 2]. An agent is hidden at t when its distance to the
/// ball exceeds `radius` (boundary visible). The ball is never hidden.
ObservationMask build_circle_mask(std::span<const double> positions, std::size_t frames,
                                  std::size_t agents, std::size_t ball_index, double radius);

/// Fixed camera at `camera_xy` tracking the ball with a field of view of
/// +-half_angle_deg. Frames where the ball sits on the camera point are all
/// visible.
ObservationMask build_camera_mask(std::span<const double> positions, std::size_t frames,
                                  std::size_t agents, std::size_t ball_index,
                                  double half_angle_deg, std::array<double, 2> camera_xy);

ExtendedMask extend_mask_with_cls(const ObservationMask& m);

/// Elementwise OR.
ObservationMask combine_masks(const ObservationMask& a, const ObservationMask& b);

TaskKind validate_task(const ObservationMask& m);

/// Per-slot role in the uncertainty mask.
enum class UncertaintyRole : std::uint8_t { kNone = 0, kSecondNeighbor = 1, kNeighbor = 2, kHidden = 3 };

/// Roles of every slot: hidden slots, visible immediate temporal neighbours of
/// hidden slots, and visible second neighbours that are not immediate
/// neighbours. Sequence ends have no neighbours beyond them.
std::vector<UncertaintyRole> uncertainty_roles(const ObservationMask& m);

struct UncertaintyMask {
  std::size_t frames = 0, agents = 0;
  std::vector<double> entries;  // [T x N] in [0, 1]
  std::vector<UncertaintyRole> roles;
  double theta = 0.0;
  double w1 = 0.5;
  double w2 = 0.5;
};

/// Logit for which sigmoid(theta) = 0.75.
double default_uncertainty_theta();

/// w1 keeps this distance from 0 and 1 so that both neighbour weights stay
/// positive even where sigmoid(theta) rounds to 0 or 1.
inline constexpr double kUncertaintyWeightFloor = 1e-12;

/// sigmoid(theta), clamped to [floor, 1 - floor].
double uncertainty_w1(double theta);

UncertaintyMask build_uncertainty_mask(const ObservationMask& m, double theta);

/// Differentiable [T x N] uncertainty weights as a function of a scalar
/// theta tensor: 1 on hidden slots, sigmoid(theta) on neighbours,
/// 1 - sigmoid(theta) on second neighbours. Slots flagged in `exclude`
/// (e.g. the NaN-mask) are forced to zero.
Tensor uncertainty_weights(const std::vector<UncertaintyRole>& roles, std::size_t frames,
                           std::size_t agents, const Tensor& theta,
                           const BinaryGrid* exclude = nullptr);

/// The binary mask itself as a constant weight tensor (no learnable part).
Tensor binary_weights(const ObservationMask& m, const BinaryGrid* exclude = nullptr);

}  // namespace trajset
