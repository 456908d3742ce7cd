// SPDX-License-Identifier: Apache-2.0
//
// Training loop, evaluation pipeline, checkpoints and attention export.
//
// Training is single-threaded and deterministic: batch order and random
// masks come from counter-based streams keyed on (seed, epoch, index), so the
// seed plus the (epoch, batch, step) position is the complete random state.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "trajset/data.hpp"
#include "trajset/model.hpp"
#include "trajset/objectives.hpp"
#include "trajset/optim.hpp"
#include "trajset/tasks.hpp"

namespace trajset {

enum class MaskRegeneration { kFixed, kPerEpoch };

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double adam_eps = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double lr_decay_factor = 0.5;
  std::size_t lr_decay_every = 20;
  double grad_clip = 5.0;
  ClipMode clip_mode = ClipMode::kGlobalNorm;
  std::uint64_t seed = 0;
  TaskSpec task;
  /// kFixed draws each sequence's mask once; kPerEpoch redraws random masks
  /// every epoch. Rule-based tasks are identical under both.
  MaskRegeneration mask_regeneration = MaskRegeneration::kPerEpoch;
  /// Stop after this many optimizer steps in total (0 = no limit).
  std::size_t max_steps = 0;
  std::array<double, 3> split{0.8, 0.1, 0.1};

  void validate() const;
  AdamWConfig optimizer(std::size_t epoch) const;
  bool operator==(const TrainConfig&) const = default;
};

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  ModelConfig model;
  TrainConfig train;
  ModelParams params;
  AdamWState optimizer;
  std::size_t epoch = 0;  // next epoch to run
  std::size_t batch = 0;  // next batch within that epoch
  std::size_t step = 0;   // optimizer steps taken

  /// Deep copy with independent parameter storage.
  Checkpoint copy() const;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  double l_ade = 0.0;
  double l_ce = 0.0;
  double w1 = 0.0;
  double grad_norm = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  double l_ade = 0.0;
  double l_ce = 0.0;
  double w1 = 0.0;
  double val_ade = 0.0;  // NaN without a validation set
  std::size_t steps = 0;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Checkpoint final_state;
  std::optional<Checkpoint> best;  // lowest validation ADE at an epoch end
  std::optional<double> best_val_ade;
  std::vector<EpochLog> epochs;
  std::vector<StepLog> steps;
};

/// Fresh state: parameters from ModelParams::create(model, train.seed).
Checkpoint initial_checkpoint(const ModelConfig& model, const TrainConfig& train);

/// Runs from `start` (fresh or resumed) until the epoch budget or
/// `max_steps` is reached. The model configuration must match the
/// checkpoint's; the training configuration is taken from `train`.
TrainResult train(const std::vector<TrajectorySequence>& train_set,
                  const std::vector<TrajectorySequence>& val_set, const Checkpoint& start,
                  const TrainConfig& train, const TrainHooks& hooks = {});

/// Loss of one sample under the current parameters, recorded on the active
/// tape when there is one.
TotalLoss sample_loss(const Sample& s, const ForwardOutput& out, const ModelConfig& cfg,
                      const ModelParams& p);

/// Seed of the evaluation mask of sequence `index`.
std::uint64_t eval_mask_seed(std::uint64_t seed, std::size_t index);

struct MetricReport {
  std::string task;
  std::string mask_spec;
  double ade = 0.0;
  std::optional<double> fde;  // reported for forecasting masks
  double max_err = 0.0;
  std::optional<double> acc;  // absent for the baseline or unlabeled data
  std::size_t d_count = 0;
  std::uint64_t seed = 0;
  std::size_t classes = 0;
  std::vector<std::size_t> confusion;  // [S x S], rows = truth, cols = predicted

  bool operator==(const MetricReport&) const = default;
};

/// Pooled metrics over all sequences: ADE over every evaluated slot, FDE and
/// MaxErr over every (sequence, agent) with an evaluated slot, Acc over every
/// frame.
MetricReport evaluate(const ModelParams& p, const ModelConfig& cfg,
                      const std::vector<TrajectorySequence>& seqs, const TaskSpec& task,
                      std::uint64_t seed);
MetricReport evaluate_baseline(const std::vector<TrajectorySequence>& seqs, const TaskSpec& task,
                               std::uint64_t seed);

void write_metric_csv(const std::vector<MetricReport>& reports, const std::string& path);
void write_confusion_csv(const MetricReport& report, const std::string& path);

struct Prediction {
  std::vector<double> trajectories;  // [T x N x 2], visible slots copied
  std::vector<int> states;           // [T] argmax, empty without the CLS agent
  ObservationMask mask;
};

std::vector<Prediction> infer(const ModelParams& p, const ModelConfig& cfg,
                              const std::vector<TrajectorySequence>& seqs, const TaskSpec& task,
                              std::uint64_t seed);

struct AttentionMaps {
  std::size_t frames = 0;
  std::size_t agents = 0;  // keys, including the CLS agent
  std::size_t query = 0;
  std::vector<double> coarse, fine;  // [T x agents]
};

/// Head-averaged social attention received by `query` from every agent.
AttentionMaps export_attention(const ModelParams& p, const ModelConfig& cfg, const Sample& sample,
                               std::size_t query);
void write_attention_csv(const AttentionMaps& maps, const std::vector<double>& weights,
                         const std::string& path);

}  // namespace trajset
