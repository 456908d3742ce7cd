// SPDX-License-Identifier: Apache-2.0
#include "trajset/config_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "trajset/error.hpp"
#include "trajset/log.hpp"

namespace trajset {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(std::uint64_t v, int) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

double as_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a real number, got '" + v + "'");
  }
}

std::uint64_t as_uint(const std::string& key, const std::string& v) {
  try {
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

[[noreturn]] void unknown(const char* what, const std::string& key) {
  throw ConfigError(std::string("unknown ") + what + " key '" + key + "'");
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(n) + ": empty key");
    for (const auto& [k, v] : kv) {
      if (k == key) throw ConfigError(origin + ":" + std::to_string(n) + ": duplicate key " + key);
    }
    kv.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path);
}

void write_key_values(const KeyValues& kv, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << format_key_values(kv);
  if (!os) throw IoError("write failed for " + path);
}

KeyValues select_prefix(const KeyValues& kv, const std::string& prefix) {
  KeyValues out;
  for (const auto& [k, v] : kv) {
    if (k.rfind(prefix, 0) == 0) out.emplace_back(k.substr(prefix.size()), v);
  }
  return out;
}

KeyValues add_prefix(const KeyValues& kv, const std::string& prefix) {
  KeyValues out;
  for (const auto& [k, v] : kv) out.emplace_back(prefix + k, v);
  return out;
}

KeyValues to_key_values(const ModelConfig& c) {
  return {{"d", fmt(c.d)},
          {"heads", fmt(c.heads)},
          {"sab_hidden", fmt(c.sab_hidden)},
          {"state_classes", fmt(c.state_classes)},
          {"input_channels", fmt(c.input_channels)},
          {"lambda_ce", fmt(c.lambda_ce)},
          {"with_cls", fmt(c.with_cls)},
          {"with_social", fmt(c.with_social)},
          {"with_unc_mask", fmt(c.with_unc_mask)},
          {"init", "xavier_normal"},
          {"pitch_length", fmt(c.pitch.length)},
          {"pitch_width", fmt(c.pitch.width)},
          {"pitch_unit", c.pitch.unit}};
}

void apply_key_values(ModelConfig& c, const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "d") c.d = as_uint(k, v);
    else if (k == "heads") c.heads = as_uint(k, v);
    else if (k == "sab_hidden") c.sab_hidden = as_uint(k, v);
    else if (k == "state_classes") c.state_classes = as_uint(k, v);
    else if (k == "input_channels") c.input_channels = as_uint(k, v);
    else if (k == "lambda_ce") c.lambda_ce = as_real(k, v);
    else if (k == "with_cls") c.with_cls = as_bool(k, v);
    else if (k == "with_social") c.with_social = as_bool(k, v);
    else if (k == "with_unc_mask") c.with_unc_mask = as_bool(k, v);
    else if (k == "init") {
      if (v != "xavier_normal") throw ConfigError("only xavier_normal initialization is supported");
    } else if (k == "pitch_length") c.pitch.length = as_real(k, v);
    else if (k == "pitch_width") c.pitch.width = as_real(k, v);
    else if (k == "pitch_unit") c.pitch.unit = v;
    else unknown("model", k);
  }
}

KeyValues to_key_values(const TrainConfig& c) {
  return {{"epochs", fmt(c.epochs)},
          {"batch_size", fmt(c.batch_size)},
          {"lr", fmt(c.lr)},
          {"adam_eps", fmt(c.adam_eps)},
          {"beta1", fmt(c.beta1)},
          {"beta2", fmt(c.beta2)},
          {"weight_decay", fmt(c.weight_decay)},
          {"lr_decay_factor", fmt(c.lr_decay_factor)},
          {"lr_decay_every", fmt(c.lr_decay_every)},
          {"grad_clip", fmt(c.grad_clip)},
          {"clip_mode", c.clip_mode == ClipMode::kGlobalNorm ? "global" : "value"},
          {"seed", fmt(c.seed, 0)},
          {"task", c.task.str()},
          {"mask_regeneration",
           c.mask_regeneration == MaskRegeneration::kFixed ? "fixed" : "per_epoch"},
          {"max_steps", fmt(c.max_steps)},
          {"split", fmt(c.split[0]) + "," + fmt(c.split[1]) + "," + fmt(c.split[2])}};
}

void apply_key_values(TrainConfig& c, const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "epochs") c.epochs = as_uint(k, v);
    else if (k == "batch_size") c.batch_size = as_uint(k, v);
    else if (k == "lr") c.lr = as_real(k, v);
    else if (k == "adam_eps") c.adam_eps = as_real(k, v);
    else if (k == "beta1") c.beta1 = as_real(k, v);
    else if (k == "beta2") c.beta2 = as_real(k, v);
    else if (k == "weight_decay") c.weight_decay = as_real(k, v);
    else if (k == "lr_decay_factor") c.lr_decay_factor = as_real(k, v);
    else if (k == "lr_decay_every") c.lr_decay_every = as_uint(k, v);
    else if (k == "grad_clip") c.grad_clip = as_real(k, v);
    else if (k == "clip_mode") {
      if (v == "global") c.clip_mode = ClipMode::kGlobalNorm;
      else if (v == "value") c.clip_mode = ClipMode::kValue;
      else throw ConfigError("clip_mode must be global or value");
    } else if (k == "seed") c.seed = as_uint(k, v);
    else if (k == "task") c.task = TaskSpec::parse(v);
    else if (k == "mask_regeneration") {
      if (v == "fixed") c.mask_regeneration = MaskRegeneration::kFixed;
      else if (v == "per_epoch") c.mask_regeneration = MaskRegeneration::kPerEpoch;
      else throw ConfigError("mask_regeneration must be fixed or per_epoch");
    } else if (k == "max_steps") c.max_steps = as_uint(k, v);
    else if (k == "split") {
      std::istringstream is(v);
      std::string part;
      std::size_t i = 0;
      while (std::getline(is, part, ',')) {
        if (i >= 3) throw ConfigError("split needs three ratios");
        c.split[i++] = as_real(k, trim(part));
      }
      if (i != 3) throw ConfigError("split needs three ratios");
    } else unknown("train", k);
  }
}

KeyValues to_key_values(const GeneratorConfig& c) {
  return {{"n_sequences", fmt(c.n_sequences)},
          {"frames", fmt(c.frames)},
          {"n_per_team", fmt(c.n_per_team)},
          {"frame_rate_hz", fmt(c.frame_rate_hz)},
          {"seed", fmt(c.seed, 0)},
          {"mode", c.mode == GeneratorMode::kPossessionGame ? "possession" : "constant_velocity"},
          {"pitch_length", fmt(c.pitch.length)},
          {"pitch_width", fmt(c.pitch.width)},
          {"pitch_unit", c.pitch.unit}};
}

void apply_key_values(GeneratorConfig& c, const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "n_sequences") c.n_sequences = as_uint(k, v);
    else if (k == "frames") c.frames = as_uint(k, v);
    else if (k == "n_per_team") c.n_per_team = as_uint(k, v);
    else if (k == "frame_rate_hz") c.frame_rate_hz = as_real(k, v);
    else if (k == "seed") c.seed = as_uint(k, v);
    else if (k == "mode") {
      if (v == "possession") c.mode = GeneratorMode::kPossessionGame;
      else if (v == "constant_velocity") c.mode = GeneratorMode::kConstantVelocity;
      else throw ConfigError("mode must be possession or constant_velocity");
    } else if (k == "pitch_length") c.pitch.length = as_real(k, v);
    else if (k == "pitch_width") c.pitch.width = as_real(k, v);
    else if (k == "pitch_unit") c.pitch.unit = v;
    else unknown("generator", k);
  }
}

void write_data_sidecar(const std::string& csv_path, const PitchSpec& pitch, double frame_rate_hz) {
  write_key_values({{"pitch_length", fmt(pitch.length)},
                    {"pitch_width", fmt(pitch.width)},
                    {"pitch_unit", pitch.unit},
                    {"frame_rate_hz", fmt(frame_rate_hz)}},
                   csv_path + ".cfg");
}

LoadOptions read_data_sidecar(const std::string& csv_path) {
  LoadOptions opts;
  const std::string path = csv_path + ".cfg";
  if (!std::filesystem::exists(path)) {
    log_warning("no " + path + "; assuming a 105 x 68 m pitch at 6.25 Hz");
    return opts;
  }
  for (const auto& [k, v] : read_key_values(path)) {
    if (k == "pitch_length") opts.pitch.length = as_real(k, v);
    else if (k == "pitch_width") opts.pitch.width = as_real(k, v);
    else if (k == "pitch_unit") opts.pitch.unit = v;
    else if (k == "frame_rate_hz") opts.frame_rate_hz = as_real(k, v);
    else unknown("data sidecar", k);
  }
  opts.pitch.validate();
  return opts;
}

}  // namespace trajset
