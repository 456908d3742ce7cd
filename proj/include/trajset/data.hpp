// SPDX-License-Identifier: Apache-2.0
//
// Trajectory sequences, CSV I/O, synthetic possession games and the
// constant-velocity baseline.
//
// CSV schema (one row per frame and agent):
//   seq_id,frame,agent_id,agent_type,x,y,valid,state
// agent_type: 0 ball, 1 offense, 2 defense. valid=0 rows may leave x/y
// empty. state is empty for unlabeled sequences, otherwise one of
// 0 pass, 1 possession, 2 uncontrolled, 3 out-of-play.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trajset/masking.hpp"
#include "trajset/pitch.hpp"

namespace trajset {

enum class AgentType : int { kBall = 0, kOffense = 1, kDefense = 2 };
enum class GameState : int { kPass = 0, kPossession = 1, kUncontrolled = 2, kOutOfPlay = 3 };
inline constexpr std::size_t kGameStateCount = 4;

struct TrajectorySequence {
  std::string seq_id;
  std::string group;  // e.g. match id; empty means the sequence is its own group
  std::size_t frames = 0;
  std::size_t agents = 0;
  std::vector<double> positions;  // [T x N x 2], field units
  std::vector<int> agent_ids;     // [N]
  std::vector<int> agent_types;   // [N]; -1 when the file carries no type column
  std::vector<int> states;        // [T], empty when unlabeled
  BinaryGrid validity;            // [T x N], 1 = observed
  double frame_rate_hz = 6.25;
  PitchSpec pitch;

  double x(std::size_t t, std::size_t n) const { return positions[(t * agents + n) * 2]; }
  double y(std::size_t t, std::size_t n) const { return positions[(t * agents + n) * 2 + 1]; }
  bool labeled() const { return !states.empty(); }
  /// Index of the single ball agent, or `agents` when there is none.
  std::size_t ball_index() const;
  NanMask nan_mask() const;
  void validate() const;
};

struct LoadOptions {
  PitchSpec pitch;
  double frame_rate_hz = 6.25;
};

/// Agents are reordered to ball, offense, defense (each by id).
std::vector<TrajectorySequence> load_sequences(const std::string& path,
                                               const LoadOptions& opts = {});
void save_sequences(const std::vector<TrajectorySequence>& seqs, const std::string& path);

/// Stable reordering: ball first, then offense, then defense, each by id.
void standardize_agent_order(TrajectorySequence& seq);

std::vector<double> normalize_positions(std::span<const double> positions, const PitchSpec& p);
std::vector<double> denormalize_positions(std::span<const double> normalized,
                                          const PitchSpec& p);

enum class GeneratorMode { kPossessionGame, kConstantVelocity };

struct GeneratorConfig {
  std::size_t n_sequences = 64;
  std::size_t frames = 60;
  std::size_t n_per_team = 11;
  double frame_rate_hz = 6.25;
  std::uint64_t seed = 1;
  PitchSpec pitch;
  GeneratorMode mode = GeneratorMode::kPossessionGame;
};

/// Synthetic games: players follow damped second-order dynamics towards
/// formation targets; the ball alternates possession and pass segments with
/// occasional loose balls and out-of-play intervals. Labels follow the ball
/// regime by construction. Deterministic per seed.
std::vector<TrajectorySequence> generate_possession_game(const GeneratorConfig& cfg);

/// Checks the generator's labeling rules on one sequence; returns an empty
/// string when they hold, otherwise a description of the first violation.
std::string check_game_labels(const TrajectorySequence& seq);

/// Constant-velocity extrapolation from the last two observed frames before
/// each hidden run (hold the last position with a single observed frame).
/// Agents never observed follow the centroid of observed agents.
std::vector<double> velocity_baseline(std::span<const double> positions, std::size_t frames,
                                      std::size_t agents, const ObservationMask& m,
                                      const BinaryGrid* nan = nullptr);

struct DatasetSplit {
  std::vector<std::size_t> train, val, test;
  std::uint64_t seed = 0;
};

/// Shuffled partition by ratios. With `groups` (one key per item) no group
/// straddles two splits.
DatasetSplit split_dataset(std::size_t n_items, const std::array<double, 3>& ratios,
                           std::uint64_t seed, const std::vector<std::string>& groups = {});

}  // namespace trajset
