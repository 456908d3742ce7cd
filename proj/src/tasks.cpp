// SPDX-License-Identifier: Apache-2.0
#include "trajset/tasks.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "trajset/error.hpp"
#include "trajset/init.hpp"

namespace trajset {

const char* to_string(TaskType t) {
  switch (t) {
    case TaskType::kForecasting: return "forecasting";
    case TaskType::kImputation: return "imputation";
    case TaskType::kInference: return "inference";
    case TaskType::kPercentage: return "percentage";
    case TaskType::kCircle: return "circle";
    case TaskType::kCamera: return "camera";
  }
  return "?";
}

namespace {

double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("task option " + key + ": expected a number, got '" + value + "'");
  }
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  const double v = parse_number(key, value);
  if (v < 0 || v != std::floor(v)) {
    throw ConfigError("task option " + key + ": expected a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

std::string format_number(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

// Union of the explicitly listed agents and the agents of the listed types.
std::vector<std::size_t> selected_agents(const TaskSpec& spec, const TrajectorySequence& seq) {
  std::vector<std::uint8_t> pick(seq.agents, 0);
  for (std::size_t a : spec.agents) {
    if (a >= seq.agents) throw TaskError("agent index " + std::to_string(a) + " out of range");
    pick[a] = 1;
  }
  for (int type : spec.types)
    for (std::size_t n = 0; n < seq.agents; ++n)
      if (seq.agent_types[n] == type) pick[n] = 1;
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < seq.agents; ++n)
    if (pick[n]) out.push_back(n);
  if (out.empty() && (!spec.agents.empty() || !spec.types.empty())) {
    throw TaskError(seq.seq_id + ": task selects no agent");
  }
  return out;
}

std::size_t ball_or_throw(const TrajectorySequence& seq) {
  const std::size_t b = seq.ball_index();
  if (b == seq.agents) throw TaskError(seq.seq_id + ": task needs a ball agent");
  return b;
}

}  // namespace

TaskSpec TaskSpec::parse(const std::string& text) {
  TaskSpec spec;
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  if (name == "forecasting") spec.type = TaskType::kForecasting;
  else if (name == "imputation") spec.type = TaskType::kImputation;
  else if (name == "inference") spec.type = TaskType::kInference;
  else if (name == "percentage") spec.type = TaskType::kPercentage;
  else if (name == "circle") spec.type = TaskType::kCircle;
  else if (name == "camera") spec.type = TaskType::kCamera;
  else throw ConfigError("unknown task '" + name + "'");
  if (colon == std::string::npos) return spec;

  std::istringstream is(text.substr(colon + 1));
  std::string item;
  while (std::getline(is, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("task option '" + item + "' needs key=value");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    if (key == "t_hat") spec.t_hat = parse_count(key, value);
    else if (key == "fraction") spec.fraction = parse_number(key, value);
    else if (key == "agents" || key == "agent") {
      std::istringstream list(value);
      std::string a;
      while (std::getline(list, a, '+')) spec.agents.push_back(parse_count(key, a));
    } else if (key == "types") {
      std::istringstream list(value);
      std::string a;
      while (std::getline(list, a, '+')) {
        const std::size_t type = parse_count(key, a);
        if (type > 2) throw ConfigError("agent types are 0, 1 or 2");
        spec.types.push_back(static_cast<int>(type));
      }
    } else if (key == "radius") spec.radius = parse_number(key, value);
    else if (key == "half_angle") spec.half_angle_deg = parse_number(key, value);
    else if (key == "cam_x") spec.camera[0] = parse_number(key, value);
    else if (key == "cam_y") spec.camera[1] = parse_number(key, value);
    else throw ConfigError("unknown task option '" + key + "'");
  }
  return spec;
}

std::string TaskSpec::str() const {
  std::string s = to_string(type);
  auto join = [](const auto& v) {
    std::string a;
    for (std::size_t i = 0; i < v.size(); ++i) a += (i ? "+" : "") + std::to_string(v[i]);
    return a;
  };
  auto agents_str = [&] { return join(agents); };
  auto selection = [&] {
    std::string sel;
    if (!agents.empty()) sel += ",agents=" + join(agents);
    if (!types.empty()) sel += ",types=" + join(types);
    return sel;
  };
  switch (type) {
    case TaskType::kForecasting: s += ":t_hat=" + std::to_string(t_hat) + selection(); break;
    case TaskType::kImputation: s += ":fraction=" + format_number(fraction); break;
    case TaskType::kInference: {
      const std::string sel = selection();
      if (!sel.empty()) s += ":" + sel.substr(1);
      break;
    }
    case TaskType::kPercentage:
      s += ":fraction=" + format_number(fraction);
      if (!agents.empty()) s += ",agent=" + agents_str();
      break;
    case TaskType::kCircle: s += ":radius=" + format_number(radius); break;
    case TaskType::kCamera:
      s += ":half_angle=" + format_number(half_angle_deg) + ",cam_x=" + format_number(camera[0]) +
           ",cam_y=" + format_number(camera[1]);
      break;
  }
  return s;
}

bool TaskSpec::randomized() const {
  return type == TaskType::kImputation || type == TaskType::kPercentage;
}

ObservationMask build_task_mask(const TaskSpec& spec, const TrajectorySequence& seq,
                                std::uint64_t seed) {
  const std::size_t T = seq.frames, N = seq.agents;
  ObservationMask m(T, N);
  switch (spec.type) {
    case TaskType::kForecasting: {
      const std::size_t t_hat =
          spec.t_hat > 0 ? spec.t_hat
                         : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.4 * static_cast<double>(T))));
      std::vector<std::size_t> predicted = selected_agents(spec, seq);
      if (predicted.empty()) {
        predicted.resize(N);
        for (std::size_t n = 0; n < N; ++n) predicted[n] = n;
      }
      m = build_forecasting_mask(T, t_hat, predicted, N);
      break;
    }
    case TaskType::kImputation: {
      if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) {
        throw TaskError("imputation fraction must lie in (0, 1)");
      }
      for (std::size_t n = 0; n < N; ++n) {
        m = combine_masks(m, build_percentage_mask(T, N, n, spec.fraction, mix_seed(seed, n)));
      }
      break;
    }
    case TaskType::kInference: {
      std::vector<std::size_t> hidden = selected_agents(spec, seq);
      if (hidden.empty()) hidden.push_back(ball_or_throw(seq));
      m = build_inference_mask(T, hidden, N);
      break;
    }
    case TaskType::kPercentage: {
      if (spec.agents.size() > 1) throw TaskError("percentage task takes a single agent");
      const std::size_t agent = spec.agents.empty() ? ball_or_throw(seq) : spec.agents[0];
      m = build_percentage_mask(T, N, agent, spec.fraction, seed);
      break;
    }
    case TaskType::kCircle:
      m = build_circle_mask(seq.positions, T, N, ball_or_throw(seq), spec.radius);
      break;
    case TaskType::kCamera:
      m = build_camera_mask(seq.positions, T, N, ball_or_throw(seq), spec.half_angle_deg,
                            spec.camera);
      break;
  }
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < N; ++n)
      if (!seq.validity.at(t, n)) m.set(t, n, false);
  return m;
}

Sample prepare_sample(const TrajectorySequence& seq, const ObservationMask& mask,
                      const ModelConfig& cfg) {
  const std::size_t T = seq.frames, N = seq.agents, C = cfg.input_channels;
  if (mask.rows() != T || mask.cols() != N) throw ShapeError("mask does not match sequence");
  Sample s;
  s.input.frames = T;
  s.input.agents = N;
  s.input.channels = C;
  s.input.features.assign(T * N * C, 0.0);
  s.input.nan = seq.nan_mask();
  s.input.mask = mask;
  s.truth.assign(T * N * 2, 0.0);
  if (C == 3) {
    for (int type : seq.agent_types) {
      if (type < 0) throw DataError(seq.seq_id + ": model uses agent types but the data has none");
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t slot = t * N + n;
      if (s.input.nan.at(t, n)) {
        s.input.mask.set(t, n, false);
        continue;
      }
      s.truth[slot * 2] = seq.x(t, n);
      s.truth[slot * 2 + 1] = seq.y(t, n);
      s.input.features[slot * C] = seq.x(t, n);
      s.input.features[slot * C + 1] = seq.y(t, n);
    }
    if (C == 3) {
      for (std::size_t n = 0; n < N; ++n) {
        s.input.features[(t * N + n) * C + 2] = static_cast<double>(seq.agent_types[n]);
      }
    }
  }
  s.states = seq.states;
  s.roles = uncertainty_roles(s.input.mask);
  return s;
}

Tensor loss_weights(const Sample& s, const ModelConfig& cfg, const ModelParams& p) {
  if (cfg.with_unc_mask) {
    return uncertainty_weights(s.roles, s.input.frames, s.input.agents, p.theta, &s.input.nan);
  }
  return binary_weights(s.input.mask, &s.input.nan);
}

}  // namespace trajset
