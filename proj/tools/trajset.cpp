// SPDX-License-Identifier: Apache-2.0
//
// trajset command line: generate-data, train, evaluate, infer,
// export-attention, baseline.
//
// Model and training options can come from a key-value file (--config, keys
// prefixed "model." and "train.") and from flags; flags win. Every command
// writes the fully resolved configuration next to its outputs.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trajset/config_io.hpp"
#include "trajset/error.hpp"
#include "trajset/harness.hpp"
#include "trajset/log.hpp"
#include "trajset/runtime.hpp"

namespace fs = std::filesystem;
using namespace trajset;

namespace {

// Flags that map one-to-one onto config keys. Values stay strings until
// apply_key_values parses them, so flag and file values share one parser.
struct KeyedFlags {
  std::string prefix;
  std::vector<std::pair<std::string, std::string>> flags;  // (flag, key)
  std::map<std::string, std::string> values;

  void attach(CLI::App* app, const std::string& group) {
    for (const auto& [flag, key] : flags) {
      app->add_option("--" + flag, values[key], "sets " + prefix + key)->group(group);
    }
  }
  KeyValues given(const CLI::App* app) const {
    KeyValues kv;
    for (const auto& [flag, key] : flags) {
      if (app->count("--" + flag) > 0) kv.emplace_back(key, values.at(key));
    }
    return kv;
  }
};

KeyedFlags model_flags() {
  return {"model.",
          {{"d", "d"},
           {"heads", "heads"},
           {"sab-hidden", "sab_hidden"},
           {"state-classes", "state_classes"},
           {"input-channels", "input_channels"},
           {"lambda", "lambda_ce"},
           {"with-cls", "with_cls"},
           {"with-social", "with_social"},
           {"with-unc-mask", "with_unc_mask"},
           {"pitch-length", "pitch_length"},
           {"pitch-width", "pitch_width"},
           {"pitch-unit", "pitch_unit"}},
          {}};
}

KeyedFlags train_flags() {
  return {"train.",
          {{"epochs", "epochs"},
           {"batch-size", "batch_size"},
           {"lr", "lr"},
           {"adam-eps", "adam_eps"},
           {"beta1", "beta1"},
           {"beta2", "beta2"},
           {"weight-decay", "weight_decay"},
           {"lr-decay-factor", "lr_decay_factor"},
           {"lr-decay-every", "lr_decay_every"},
           {"grad-clip", "grad_clip"},
           {"clip-mode", "clip_mode"},
           {"seed", "seed"},
           {"task", "task"},
           {"mask-regeneration", "mask_regeneration"},
           {"max-steps", "max_steps"},
           {"split", "split"}},
          {}};
}

KeyedFlags generator_flags() {
  return {"generator.",
          {{"n-sequences", "n_sequences"},
           {"frames", "frames"},
           {"n-per-team", "n_per_team"},
           {"frame-rate", "frame_rate_hz"},
           {"seed", "seed"},
           {"mode", "mode"},
           {"pitch-length", "pitch_length"},
           {"pitch-width", "pitch_width"},
           {"pitch-unit", "pitch_unit"}},
          {}};
}

KeyValues concat_kv(KeyValues a, const KeyValues& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Later pairs override earlier ones.
KeyValues merged(const KeyValues& kv) {
  KeyValues out;
  for (const auto& [k, v] : kv) {
    bool replaced = false;
    for (auto& [ok, ov] : out) {
      if (ok == k) {
        ov = v;
        replaced = true;
      }
    }
    if (!replaced) out.emplace_back(k, v);
  }
  return out;
}

KeyValues file_section(const std::string& path, const std::string& prefix) {
  if (path.empty()) return {};
  return select_prefix(read_key_values(path), prefix);
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

std::vector<TrajectorySequence> load_data(const std::string& path) {
  return load_sequences(path, read_data_sidecar(path));
}

std::vector<TrajectorySequence> pick(const std::vector<TrajectorySequence>& all,
                                     const std::vector<std::size_t>& idx) {
  std::vector<TrajectorySequence> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

DatasetSplit split_for(const std::vector<TrajectorySequence>& data, const TrainConfig& tc) {
  std::vector<std::string> groups;
  for (const auto& s : data) groups.push_back(s.group.empty() ? s.seq_id : s.group);
  return split_dataset(data.size(), tc.split, tc.seed, groups);
}

std::vector<TrajectorySequence> select_split(const std::vector<TrajectorySequence>& data,
                                             const TrainConfig& tc, const std::string& which) {
  if (which == "all") return data;
  const auto s = split_for(data, tc);
  if (which == "train") return pick(data, s.train);
  if (which == "val") return pick(data, s.val);
  if (which == "test") return pick(data, s.test);
  throw ConfigError("--split must be train, val, test or all");
}

void write_resolved(const std::string& path, const std::vector<std::pair<std::string, KeyValues>>& parts) {
  KeyValues all;
  for (const auto& [prefix, kv] : parts) all = concat_kv(all, add_prefix(kv, prefix));
  write_key_values(all, path);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string out, config;
  KeyedFlags gen = generator_flags();
};

void run_generate(const GenerateArgs& a, const CLI::App* app) {
  GeneratorConfig g;
  apply_key_values(g, merged(concat_kv(file_section(a.config, "generator."), a.gen.given(app))));
  auto seqs = generate_possession_game(g);
  const fs::path out(a.out);
  if (out.has_parent_path()) make_dir(out.parent_path().string());
  save_sequences(seqs, a.out);
  write_data_sidecar(a.out, g.pitch, g.frame_rate_hz);
  write_resolved(a.out + ".resolved.cfg", {{"generator.", to_key_values(g)}});
  log_info("wrote " + std::to_string(seqs.size()) + " sequences to " + a.out);
}

struct TrainArgs {
  std::string data, out_dir, config, resume;
  KeyedFlags model = model_flags();
  KeyedFlags train = train_flags();
};

void write_epoch_log(const std::vector<EpochLog>& epochs, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "epoch,lr,total,l_ade,l_ce,w1,val_ade,steps\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << fmt17(e.lr) << ',' << fmt17(e.total) << ',' << fmt17(e.l_ade) << ','
       << fmt17(e.l_ce) << ',' << fmt17(e.w1) << ',' << (std::isnan(e.val_ade) ? "" : fmt17(e.val_ade))
       << ',' << e.steps << '\n';
  }
}

void run_train(const TrainArgs& a, const CLI::App* app) {
  const KeyValues model_kv = merged(concat_kv(file_section(a.config, "model."), a.model.given(app)));
  const KeyValues train_kv = merged(concat_kv(file_section(a.config, "train."), a.train.given(app)));

  Checkpoint start;
  TrainConfig tc;
  if (!a.resume.empty()) {
    start = load_checkpoint(a.resume);
    if (!model_kv.empty()) throw ConfigError("model options cannot change when resuming");
    tc = start.train;
    apply_key_values(tc, train_kv);
  } else {
    ModelConfig mc;
    apply_key_values(mc, model_kv);
    apply_key_values(tc, train_kv);
    mc.validate();
    start = initial_checkpoint(mc, tc);
  }
  tc.validate();

  auto data = load_data(a.data);
  for (const auto& s : data) {
    if (!(s.pitch == start.model.pitch)) {
      log_warning("data pitch differs from the model pitch; positions are normalized with the model's");
      break;
    }
  }
  const auto split = split_for(data, tc);
  const auto train_set = pick(data, split.train), val_set = pick(data, split.val),
             test_set = pick(data, split.test);
  log_info("split: " + std::to_string(train_set.size()) + " train, " + std::to_string(val_set.size()) +
           " val, " + std::to_string(test_set.size()) + " test");

  make_dir(a.out_dir);
  write_resolved(a.out_dir + "/resolved.cfg",
                 {{"model.", to_key_values(start.model)}, {"train.", to_key_values(tc)}});

  std::ofstream steps(a.out_dir + "/steps.csv");
  steps << "step,epoch,lr,total,l_ade,l_ce,w1,grad_norm\n";
  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& s) {
    steps << s.step << ',' << s.epoch << ',' << fmt17(s.lr) << ',' << fmt17(s.total) << ','
          << fmt17(s.l_ade) << ',' << fmt17(s.l_ce) << ',' << fmt17(s.w1) << ','
          << fmt17(s.grad_norm) << '\n';
  };
  hooks.on_epoch = [](const EpochLog& e) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "epoch %zu lr %.3g loss %.4f ade %.4f ce %.4f w1 %.3f val_ade %.4f",
                  e.epoch, e.lr, e.total, e.l_ade, e.l_ce, e.w1, e.val_ade);
    log_info(buf);
  };
  auto result = train(train_set, val_set, start, tc, hooks);
  save_checkpoint(result.final_state, a.out_dir + "/final.ckpt");
  write_epoch_log(result.epochs, a.out_dir + "/epochs.csv");
  if (result.best) save_checkpoint(*result.best, a.out_dir + "/best.ckpt");

  if (!test_set.empty()) {
    const auto& mc = result.final_state.model;
    write_metric_csv({evaluate(result.final_state.params, mc, test_set, tc.task, tc.seed)},
                     a.out_dir + "/test_metrics_final.csv");
    if (result.best) {
      write_metric_csv({evaluate(result.best->params, mc, test_set, tc.task, tc.seed)},
                       a.out_dir + "/test_metrics_best_val.csv");
    }
  }
  log_info("checkpoints written to " + a.out_dir);
}

struct EvalArgs {
  std::string checkpoint, data, out_dir, task, split = "test";
  std::uint64_t seed = 0;
  std::string seq_id;
  std::size_t query = 0;
  bool query_set = false;
};

TaskSpec eval_task(const EvalArgs& a, const Checkpoint* ck) {
  if (!a.task.empty()) return TaskSpec::parse(a.task);
  if (ck) return ck->train.task;
  return TaskSpec{};
}

std::vector<TrajectorySequence> eval_data(const EvalArgs& a, const TrainConfig& tc) {
  auto seqs = select_split(load_data(a.data), tc, a.split);
  if (seqs.empty()) throw DataError("the " + a.split + " split of " + a.data + " is empty");
  return seqs;
}

void run_evaluate(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const TaskSpec task = eval_task(a, &ck);
  const auto seqs = eval_data(a, ck.train);
  const auto report = evaluate(ck.params, ck.model, seqs, task, a.seed);
  make_dir(a.out_dir);
  write_metric_csv({report}, a.out_dir + "/metrics.csv");
  if (report.acc) write_confusion_csv(report, a.out_dir + "/confusion.csv");
  write_resolved(a.out_dir + "/resolved.cfg",
                 {{"model.", to_key_values(ck.model)},
                  {"train.", to_key_values(ck.train)},
                  {"eval.", {{"checkpoint", a.checkpoint}, {"data", a.data}, {"split", a.split},
                             {"task", task.str()}, {"seed", std::to_string(a.seed)}}}});
  std::printf("ade %.6f", report.ade);
  if (report.fde) std::printf(" fde %.6f", *report.fde);
  std::printf(" max_err %.6f", report.max_err);
  if (report.acc) std::printf(" acc %.6f", *report.acc);
  std::printf(" d_count %zu\n", report.d_count);
}

void run_baseline(const EvalArgs& a) {
  TrainConfig tc;  // default split and seed when no checkpoint is involved
  const TaskSpec task = eval_task(a, nullptr);
  const auto seqs = eval_data(a, tc);
  const auto report = evaluate_baseline(seqs, task, a.seed);
  make_dir(a.out_dir);
  write_metric_csv({report}, a.out_dir + "/metrics.csv");
  write_resolved(a.out_dir + "/resolved.cfg",
                 {{"baseline.", {{"method", "constant_velocity"}, {"data", a.data}, {"split", a.split},
                                 {"split_ratios", fmt17(tc.split[0]) + "," + fmt17(tc.split[1]) + "," +
                                                      fmt17(tc.split[2])},
                                 {"split_seed", std::to_string(tc.seed)},
                                 {"task", task.str()}, {"seed", std::to_string(a.seed)}}}});
  std::printf("ade %.6f", report.ade);
  if (report.fde) std::printf(" fde %.6f", *report.fde);
  std::printf(" max_err %.6f d_count %zu\n", report.max_err, report.d_count);
}

void run_infer(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const TaskSpec task = eval_task(a, &ck);
  const auto seqs = eval_data(a, ck.train);
  const auto preds = infer(ck.params, ck.model, seqs, task, a.seed);
  make_dir(a.out_dir);
  const std::string path = a.out_dir + "/predictions.csv";
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "seq_id,frame,agent_id,agent_type,x,y,hidden,state\n";
  char buf[64];
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto& s = seqs[i];
    const auto& p = preds[i];
    for (std::size_t t = 0; t < s.frames; ++t) {
      for (std::size_t n = 0; n < s.agents; ++n) {
        os << s.seq_id << ',' << t << ',' << s.agent_ids[n] << ',';
        if (s.agent_types[n] >= 0) os << s.agent_types[n];
        const double* xy = p.trajectories.data() + (t * s.agents + n) * 2;
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,", xy[0], xy[1]);
        os << buf << static_cast<int>(p.mask.at(t, n)) << ',';
        if (!p.states.empty()) os << p.states[t];
        os << '\n';
      }
    }
  }
  write_resolved(a.out_dir + "/resolved.cfg",
                 {{"model.", to_key_values(ck.model)},
                  {"infer.", {{"checkpoint", a.checkpoint}, {"data", a.data}, {"split", a.split},
                              {"task", task.str()}, {"seed", std::to_string(a.seed)}}}});
  log_info("wrote " + path);
}

void run_export_attention(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const TaskSpec task = eval_task(a, &ck);
  const auto seqs = eval_data(a, ck.train);
  std::size_t index = 0;
  if (!a.seq_id.empty()) {
    index = seqs.size();
    for (std::size_t i = 0; i < seqs.size(); ++i)
      if (seqs[i].seq_id == a.seq_id) index = i;
    if (index == seqs.size()) throw DataError("no sequence '" + a.seq_id + "' in the " + a.split + " split");
  }
  const auto& seq = seqs[index];
  const std::size_t query = a.query_set ? a.query : seq.ball_index();
  if (query >= seq.agents) throw ConfigError("query agent " + std::to_string(query) + " out of range");
  const auto mask = build_task_mask(task, seq, eval_mask_seed(a.seed, index));
  const auto sample = prepare_sample(seq, mask, ck.model);
  const auto maps = export_attention(ck.params, ck.model, sample, query);
  make_dir(a.out_dir);
  write_attention_csv(maps, maps.coarse, a.out_dir + "/attention_coarse.csv");
  write_attention_csv(maps, maps.fine, a.out_dir + "/attention_fine.csv");
  write_resolved(a.out_dir + "/resolved.cfg",
                 {{"model.", to_key_values(ck.model)},
                  {"attention.", {{"checkpoint", a.checkpoint}, {"data", a.data}, {"split", a.split},
                                  {"seq_id", seq.seq_id}, {"query", std::to_string(query)},
                                  {"task", task.str()}, {"seed", std::to_string(a.seed)}}}});
  log_info("wrote attention maps for " + seq.seq_id + " to " + a.out_dir);
}

void add_eval_options(CLI::App* cmd, EvalArgs& a, bool with_checkpoint) {
  if (with_checkpoint) cmd->add_option("--checkpoint", a.checkpoint, "checkpoint file")->required();
  cmd->add_option("--data", a.data, "sequence CSV")->required();
  cmd->add_option("--out-dir", a.out_dir, "output directory")->required();
  cmd->add_option("--task", a.task, "task spec, e.g. forecasting:t_hat=20 (default: the checkpoint's)");
  cmd->add_option("--split", a.split, "train, val, test or all")->capture_default_str();
  cmd->add_option("--seed", a.seed, "seed of random evaluation masks")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  configure_runtime();
  CLI::App app{"Set-attention trajectory model: data generation, training and evaluation"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug, info, warning, error or off")->capture_default_str();

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-data", "generate synthetic possession-game sequences");
  g->add_option("--out", gen.out, "output CSV")->required();
  g->add_option("--config", gen.config, "key-value file (generator.* keys)");
  gen.gen.attach(g, "Generator");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--data", tr.data, "sequence CSV")->required();
  t->add_option("--out-dir", tr.out_dir, "output directory")->required();
  t->add_option("--config", tr.config, "key-value file (model.* and train.* keys)");
  t->add_option("--resume", tr.resume, "continue from this checkpoint");
  tr.model.attach(t, "Model");
  tr.train.attach(t, "Training");

  EvalArgs ev, inf, att, base;
  auto* e = app.add_subcommand("evaluate", "metrics of a checkpoint on a data split");
  add_eval_options(e, ev, true);
  auto* i = app.add_subcommand("infer", "write completed trajectories and predicted states");
  add_eval_options(i, inf, true);
  auto* x = app.add_subcommand("export-attention", "write social attention maps for one sequence");
  add_eval_options(x, att, true);
  x->add_option("--seq-id", att.seq_id, "sequence id (default: first of the split)");
  auto* q = x->add_option("--query", att.query, "query agent index (default: the ball)");
  auto* b = app.add_subcommand("baseline", "constant-velocity baseline metrics");
  add_eval_options(b, base, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (log_level == "debug") set_log_level(LogLevel::kDebug);
    else if (log_level == "info") set_log_level(LogLevel::kInfo);
    else if (log_level == "warning") set_log_level(LogLevel::kWarning);
    else if (log_level == "error") set_log_level(LogLevel::kError);
    else if (log_level == "off") set_log_level(LogLevel::kOff);
    else throw ConfigError("unknown log level '" + log_level + "'");

    if (g->parsed()) run_generate(gen, g);
    else if (t->parsed()) run_train(tr, t);
    else if (e->parsed()) run_evaluate(ev);
    else if (i->parsed()) run_infer(inf);
    else if (x->parsed()) {
      att.query_set = q->count() > 0;
      run_export_attention(att);
    } else if (b->parsed()) run_baseline(base);
  } catch (const Error& err) {
    std::fprintf(stderr, "error [%s]: %s\n", to_string(err.category()), err.what());
    return exit_code(err.category());
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error [internal]: %s\n", err.what());
    return 70;
  }
  return 0;
}
