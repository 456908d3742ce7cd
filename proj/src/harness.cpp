// SPDX-License-Identifier: Apache-2.0
#include "trajset/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "trajset/error.hpp"
#include "trajset/init.hpp"
#include "trajset/log.hpp"
#include "trajset/objectives.hpp"
#include "trajset/ops.hpp"

namespace trajset {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566;
constexpr std::uint64_t kTrainMaskStream = 0x746d736b;
constexpr std::uint64_t kEvalMaskStream = 0x656d736b;

double theta_w1(const ModelParams& p) {
  return uncertainty_w1(p.theta.values()[0]);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, kShuffleStream, epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw ConfigError("lr_decay_factor must lie in (0, 1]");
  }
  if (lr_decay_every == 0) throw ConfigError("lr_decay_every must be positive");
  if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
  double total = 0.0;
  for (double r : split) {
    if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
}

AdamWConfig TrainConfig::optimizer(std::size_t epoch) const {
  AdamWConfig c;
  c.lr = lr_schedule(epoch, lr, lr_decay_factor, lr_decay_every);
  c.beta1 = beta1;
  c.beta2 = beta2;
  c.eps = adam_eps;
  c.weight_decay = weight_decay;
  return c;
}

Checkpoint Checkpoint::copy() const {
  Checkpoint c;
  c.model = model;
  c.train = train;
  c.params = params.clone(model);
  c.optimizer = optimizer;
  c.epoch = epoch;
  c.batch = batch;
  c.step = step;
  return c;
}

Checkpoint initial_checkpoint(const ModelConfig& model, const TrainConfig& train) {
  model.validate();
  train.validate();
  Checkpoint c;
  c.model = model;
  c.train = train;
  c.params = ModelParams::create(model, train.seed);
  c.optimizer = AdamWState::for_params(c.params.registry);
  return c;
}

TotalLoss sample_loss(const Sample& s, const ForwardOutput& out, const ModelConfig& cfg,
                      const ModelParams& p) {
  Tensor w = loss_weights(s, cfg, p);
  std::vector<double> targets;
  if (cfg.with_cls && cfg.lambda_ce > 0.0 && !s.states.empty()) {
    targets = one_hot(s.states, cfg.state_classes);
  }
  return total_loss(out.raw_predictions, s.truth, w, targets, out.state_scores, cfg.lambda_ce,
                    theta_w1(p));
}

std::uint64_t eval_mask_seed(std::uint64_t seed, std::size_t index) {
  return mix_seed(seed, kEvalMaskStream, index);
}

TrainResult train(const std::vector<TrajectorySequence>& train_set,
                  const std::vector<TrajectorySequence>& val_set, const Checkpoint& start,
                  const TrainConfig& tc, const TrainHooks& hooks) {
  tc.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  TrainResult result;
  result.final_state = start.copy();
  Checkpoint& state = result.final_state;
  state.train = tc;
  const ModelConfig& mc = state.model;
  ModelParams& p = state.params;
  if (state.optimizer.m.empty()) state.optimizer = AdamWState::for_params(p.registry);

  const std::size_t n = train_set.size();
  const std::size_t batches = (n + tc.batch_size - 1) / tc.batch_size;
  const bool fixed_masks =
      !tc.task.randomized() || tc.mask_regeneration == MaskRegeneration::kFixed;
  std::vector<std::optional<Sample>> cache(fixed_masks ? n : 0);
  std::optional<Sample> scratch;
  auto sample_for = [&](std::size_t idx, std::size_t epoch) -> const Sample& {
    const std::uint64_t key = fixed_masks ? 0 : epoch + 1;
    std::optional<Sample>& slot = fixed_masks ? cache[idx] : scratch;
    if (!fixed_masks || !slot) {
      const auto& seq = train_set[idx];
      const ObservationMask m =
          build_task_mask(tc.task, seq, mix_seed(tc.seed, kTrainMaskStream + key, idx));
      slot = prepare_sample(seq, m, mc);
    }
    return *slot;
  };

  bool stop = false;
  while (state.epoch < tc.epochs && !stop) {
    const auto order = epoch_order(n, tc.seed, state.epoch);
    const AdamWConfig oc = tc.optimizer(state.epoch);
    EpochLog elog;
    elog.epoch = state.epoch;
    elog.lr = oc.lr;
    for (; state.batch < batches; ++state.batch) {
      if (tc.max_steps > 0 && state.step >= tc.max_steps) {
        stop = true;
        break;
      }
      clear_gradients(p.registry);
      const std::size_t lo = state.batch * tc.batch_size;
      const std::size_t hi = std::min(n, lo + tc.batch_size);
      const double inv = 1.0 / static_cast<double>(hi - lo);
      StepLog slog;
      slog.epoch = state.epoch;
      slog.lr = oc.lr;
      for (std::size_t i = lo; i < hi; ++i) {
        const std::size_t idx = order[i];
        const Sample& s = sample_for(idx, state.epoch);
        Tape tape;
        TapeScope scope(tape);
        const ForwardOutput out = forward(s.input, mc, p);
        const TotalLoss loss = sample_loss(s, out, mc, p);
        if (!std::isfinite(loss.report.total)) {
          throw NumericError("training diverged: non-finite loss on sequence " +
                             train_set[idx].seq_id + " at step " + std::to_string(state.step));
        }
        tape.backward(scale(loss.total, inv));
        slog.total += inv * loss.report.total;
        slog.l_ade += inv * loss.report.l_ade;
        slog.l_ce += inv * loss.report.l_ce;
      }
      slog.grad_norm = clip_gradients(p.registry, tc.grad_clip, tc.clip_mode);
      adamw_step(p.registry, state.optimizer, oc);
      ++state.step;
      slog.step = state.step;
      slog.w1 = theta_w1(p);
      result.steps.push_back(slog);
      if (hooks.on_step) hooks.on_step(slog);
      elog.total += slog.total;
      elog.l_ade += slog.l_ade;
      elog.l_ce += slog.l_ce;
      ++elog.steps;
    }
    if (stop) break;

    if (elog.steps > 0) {
      const double k = static_cast<double>(elog.steps);
      elog.total /= k;
      elog.l_ade /= k;
      elog.l_ce /= k;
    }
    elog.w1 = theta_w1(p);
    elog.val_ade = std::numeric_limits<double>::quiet_NaN();
    ++state.epoch;
    state.batch = 0;
    if (!val_set.empty()) {
      elog.val_ade = evaluate(p, mc, val_set, tc.task, tc.seed).ade;
      if (!result.best_val_ade || elog.val_ade < *result.best_val_ade) {
        result.best_val_ade = elog.val_ade;
        result.best = state.copy();
      }
    }
    result.epochs.push_back(elog);
    if (hooks.on_epoch) hooks.on_epoch(elog);
  }
  clear_gradients(p.registry);
  return result;
}

namespace {

std::size_t evaluated_slots(const Sample& s) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < s.input.mask.bits().size(); ++i) {
    c += s.input.mask.bits()[i] && !s.input.nan.bits()[i];
  }
  return c;
}

struct Pool {
  double ade_sum = 0.0;
  std::size_t slots = 0;
  double fde_sum = 0.0;
  double max_sum = 0.0;
  std::size_t agents = 0;
  std::size_t hits = 0, frames = 0;
  bool any_states = false;

  void add_positions(const Sample& s, std::span<const double> predicted) {
    const std::size_t c = evaluated_slots(s);
    if (c == 0) return;
    ade_sum += ade_metric(predicted, s.truth, s.input.mask, &s.input.nan) * static_cast<double>(c);
    slots += c;
    const MaxErrResult mx = max_err_metric(predicted, s.truth, s.input.mask, &s.input.nan);
    max_sum += mx.value * static_cast<double>(mx.d_count);
    fde_sum += fde_metric(predicted, s.truth, s.input.mask, &s.input.nan) *
               static_cast<double>(mx.d_count);
    agents += mx.d_count;
  }
};

MetricReport finish(const Pool& pool, const TaskSpec& task, std::uint64_t seed) {
  if (pool.slots == 0) throw TaskError("evaluation mask hides no observed slot in any sequence");
  MetricReport r;
  r.task = to_string(task.type);
  r.mask_spec = task.str();
  r.seed = seed;
  r.ade = pool.ade_sum / static_cast<double>(pool.slots);
  if (task.type == TaskType::kForecasting) r.fde = pool.fde_sum / static_cast<double>(pool.agents);
  r.max_err = pool.max_sum / static_cast<double>(pool.agents);
  r.d_count = pool.agents;
  return r;
}

}  // namespace

MetricReport evaluate(const ModelParams& p, const ModelConfig& cfg,
                      const std::vector<TrajectorySequence>& seqs, const TaskSpec& task,
                      std::uint64_t seed) {
  if (seqs.empty()) throw DataError("evaluation set is empty");
  Pool pool;
  const std::size_t S = cfg.state_classes;
  std::vector<std::size_t> confusion(S * S, 0);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const Sample s = prepare_sample(seqs[i], build_task_mask(task, seqs[i], eval_mask_seed(seed, i)), cfg);
    const ForwardOutput out = forward(s.input, cfg, p);
    pool.add_positions(s, out.trajectories);
    if (out.state_scores.defined() && !s.states.empty()) {
      pool.any_states = true;
      const auto scores = out.state_scores.values();
      for (std::size_t t = 0; t < s.input.frames; ++t) {
        const std::size_t pred = argmax_row(scores.subspan(t * S, S));
        const auto truth = static_cast<std::size_t>(s.states[t]);
        if (truth >= S) throw DataError("state label exceeds the model's class count");
        ++confusion[truth * S + pred];
        pool.hits += pred == truth;
        ++pool.frames;
      }
    }
  }
  MetricReport r = finish(pool, task, seed);
  if (pool.any_states) {
    r.acc = static_cast<double>(pool.hits) / static_cast<double>(pool.frames);
    r.classes = S;
    r.confusion = std::move(confusion);
  }
  return r;
}

MetricReport evaluate_baseline(const std::vector<TrajectorySequence>& seqs, const TaskSpec& task,
                               std::uint64_t seed) {
  if (seqs.empty()) throw DataError("evaluation set is empty");
  ModelConfig shape_only;
  shape_only.input_channels = 2;
  Pool pool;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const Sample s =
        prepare_sample(seqs[i], build_task_mask(task, seqs[i], eval_mask_seed(seed, i)), shape_only);
    const auto predicted = velocity_baseline(s.truth, s.input.frames, s.input.agents, s.input.mask,
                                             &s.input.nan);
    pool.add_positions(s, predicted);
  }
  return finish(pool, task, seed);
}

namespace {

std::string real_cell(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_metric_csv(const std::vector<MetricReport>& reports, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "task,mask_spec,ade,fde,max_err,acc,d_count,seed\n";
  for (const auto& r : reports) {
    os << r.task << ",\"" << r.mask_spec << "\"," << real_cell(r.ade) << ','
       << (r.fde ? real_cell(*r.fde) : "") << ',' << real_cell(r.max_err) << ','
       << (r.acc ? real_cell(*r.acc) : "") << ',' << r.d_count << ',' << r.seed << '\n';
  }
  if (!os) throw IoError("write failed for " + path);
}

void write_confusion_csv(const MetricReport& r, const std::string& path) {
  if (r.classes == 0) throw ContractError("report carries no confusion matrix");
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "truth";
  for (std::size_t c = 0; c < r.classes; ++c) os << ",pred_" << c;
  os << '\n';
  for (std::size_t a = 0; a < r.classes; ++a) {
    os << a;
    for (std::size_t b = 0; b < r.classes; ++b) os << ',' << r.confusion[a * r.classes + b];
    os << '\n';
  }
  if (!os) throw IoError("write failed for " + path);
}

std::vector<Prediction> infer(const ModelParams& p, const ModelConfig& cfg,
                              const std::vector<TrajectorySequence>& seqs, const TaskSpec& task,
                              std::uint64_t seed) {
  std::vector<Prediction> out;
  out.reserve(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const Sample s = prepare_sample(seqs[i], build_task_mask(task, seqs[i], eval_mask_seed(seed, i)), cfg);
    ForwardOutput f = forward(s.input, cfg, p);
    Prediction pr;
    pr.trajectories = std::move(f.trajectories);
    pr.mask = s.input.mask;
    if (f.state_scores.defined()) {
      const auto scores = f.state_scores.values();
      for (std::size_t t = 0; t < s.input.frames; ++t) {
        pr.states.push_back(static_cast<int>(
            argmax_row(scores.subspan(t * cfg.state_classes, cfg.state_classes))));
      }
    }
    out.push_back(std::move(pr));
  }
  return out;
}

AttentionMaps export_attention(const ModelParams& p, const ModelConfig& cfg, const Sample& sample,
                               std::size_t query) {
  if (!cfg.with_social) throw ConfigError("model has no social attention blocks");
  const std::size_t T = sample.input.frames;
  const std::size_t A = sample.input.agents + (cfg.with_cls ? 1 : 0);
  if (query >= A) {
    throw ConfigError("unknown query agent " + std::to_string(query) + " (model sees " +
                      std::to_string(A) + " agents)");
  }
  const ForwardOutput out = forward(sample.input, cfg, p, true);
  AttentionMaps maps;
  maps.frames = T;
  maps.agents = A;
  maps.query = query;
  maps.coarse.resize(T * A);
  maps.fine.resize(T * A);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < A; ++k) {
      maps.coarse[t * A + k] = out.coarse_social_attention[(t * A + query) * A + k];
      maps.fine[t * A + k] = out.fine_social_attention[(t * A + query) * A + k];
    }
  }
  return maps;
}

void write_attention_csv(const AttentionMaps& maps, const std::vector<double>& weights,
                         const std::string& path) {
  if (weights.size() != maps.frames * maps.agents) throw ShapeError("attention map size");
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "frame";
  for (std::size_t k = 0; k < maps.agents; ++k) os << ",agent_" << k;
  os << '\n';
  for (std::size_t t = 0; t < maps.frames; ++t) {
    os << t;
    for (std::size_t k = 0; k < maps.agents; ++k) os << ',' << real_cell(weights[t * maps.agents + k]);
    os << '\n';
  }
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace trajset
