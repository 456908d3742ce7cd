// SPDX-License-Identifier: Apache-2.0
//
// Task specifications and per-sequence sample preparation.
//
// Spec strings are a task name followed by optional comma-separated
// key=value pairs, e.g. "forecasting:t_hat=20", "inference:agents=0",
// "percentage:agent=0,fraction=0.5", "circle:radius=15",
// "camera:half_angle=30,cam_x=52.5,cam_y=-30", "imputation:fraction=0.4".
// Forecasting and inference pick their predicted agents with `agents`
// (indices joined by '+') and/or `types` (agent types joined by '+'), e.g.
// "forecasting:t_hat=20,types=1" hides the future of the offense only while
// the ball and the defense stay visible.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "trajset/data.hpp"
#include "trajset/masking.hpp"
#include "trajset/model.hpp"

namespace trajset {

enum class TaskType { kForecasting, kImputation, kInference, kPercentage, kCircle, kCamera };

const char* to_string(TaskType t);

struct TaskSpec {
  TaskType type = TaskType::kForecasting;
  std::size_t t_hat = 0;            // forecasting; 0 = observe 40% of the frames
  double fraction = 0.5;            // imputation and percentage
  std::vector<std::size_t> agents;  // predicted agents / percentage agent
  std::vector<int> types;           // predicted agent types (forecasting, inference)
  double radius = 20.0;             // circle
  double half_angle_deg = 35.0;     // camera
  std::array<double, 2> camera{52.5, -30.0};

  static TaskSpec parse(const std::string& text);
  std::string str() const;
  /// Masks drawn at random (imputation, percentage) as opposed to a fixed rule.
  bool randomized() const;
  bool operator==(const TaskSpec&) const = default;
};

/// Builds the observation mask for one sequence. Random tasks draw from
/// `seed`. NaN-masked slots are never prediction targets.
ObservationMask build_task_mask(const TaskSpec& spec, const TrajectorySequence& seq,
                                std::uint64_t seed);

/// A sequence plus mask, ready for the network and the losses.
struct Sample {
  ModelInput input;
  std::vector<double> truth;  // [T x N x 2] field units; zero at NaN slots
  std::vector<int> states;    // [T] or empty
  std::vector<UncertaintyRole> roles;
};

Sample prepare_sample(const TrajectorySequence& seq, const ObservationMask& mask,
                      const ModelConfig& cfg);

/// Loss weights for one sample: the uncertainty mask when enabled, otherwise
/// the binary observation mask. NaN slots weigh zero.
Tensor loss_weights(const Sample& s, const ModelConfig& cfg, const ModelParams& p);

}  // namespace trajset
