// SPDX-License-Identifier: Apache-2.0
#include "trajset/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "trajset/error.hpp"
#include "trajset/init.hpp"

namespace trajset {

void PitchSpec::validate() const {
  if (!(length > 0.0) || !(width > 0.0)) throw ConfigError("pitch dimensions must be positive");
  if (unit != "meters" && unit != "feet") throw ConfigError("pitch unit must be meters or feet");
}

std::size_t TrajectorySequence::ball_index() const {
  std::size_t found = agents;
  for (std::size_t n = 0; n < agents; ++n) {
    if (agent_types[n] == static_cast<int>(AgentType::kBall)) {
      if (found != agents) return agents;  // ambiguous
      found = n;
    }
  }
  return found;
}

NanMask TrajectorySequence::nan_mask() const {
  NanMask m(frames, agents);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t n = 0; n < agents; ++n) m.set(t, n, validity.at(t, n) == 0);
  return m;
}

void TrajectorySequence::validate() const {
  if (positions.size() != frames * agents * 2) throw DataError(seq_id + ": positions shape");
  if (agent_types.size() != agents || agent_ids.size() != agents) {
    throw DataError(seq_id + ": agent table size");
  }
  if (validity.rows() != frames || validity.cols() != agents) {
    throw DataError(seq_id + ": validity shape");
  }
  if (!states.empty() && states.size() != frames) throw DataError(seq_id + ": states length");
  for (int s : states) {
    if (s < 0 || s >= static_cast<int>(kGameStateCount)) {
      throw DataError(seq_id + ": state label " + std::to_string(s) + " out of range");
    }
  }
  std::size_t balls = 0;
  for (int type : agent_types) {
    if (type < -1 || type > 2) throw DataError(seq_id + ": agent type out of range");
    balls += type == 0;
  }
  if (balls > 1) throw DataError(seq_id + ": more than one ball agent");
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t n = 0; n < agents; ++n)
      if (validity.at(t, n) && (!std::isfinite(x(t, n)) || !std::isfinite(y(t, n)))) {
        throw DataError(seq_id + ": non-finite position at a valid slot");
      }
}

void standardize_agent_order(TrajectorySequence& seq) {
  std::vector<std::size_t> order(seq.agents);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    // Unknown types (-1) sort after the defined ones.
    const int ta = seq.agent_types[a] < 0 ? 3 : seq.agent_types[a];
    const int tb = seq.agent_types[b] < 0 ? 3 : seq.agent_types[b];
    if (ta != tb) return ta < tb;
    return seq.agent_ids[a] < seq.agent_ids[b];
  });
  TrajectorySequence out = seq;
  for (std::size_t k = 0; k < seq.agents; ++k) {
    const std::size_t src = order[k];
    out.agent_ids[k] = seq.agent_ids[src];
    out.agent_types[k] = seq.agent_types[src];
    for (std::size_t t = 0; t < seq.frames; ++t) {
      out.positions[(t * seq.agents + k) * 2] = seq.x(t, src);
      out.positions[(t * seq.agents + k) * 2 + 1] = seq.y(t, src);
      out.validity.set(t, k, seq.validity.at(t, src) != 0);
    }
  }
  seq = std::move(out);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return cells;
}

[[noreturn]] void fail_at(const std::string& path, std::size_t line, const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

long parse_int(const std::string& s, const std::string& path, std::size_t line,
               const char* column) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail_at(path, line, std::string("column ") + column + ": expected integer, got '" + s + "'");
  }
}

double parse_real(const std::string& s, const std::string& path, std::size_t line,
                  const char* column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail_at(path, line, std::string("column ") + column + ": expected number, got '" + s + "'");
  }
}

struct Row {
  long frame;
  long agent_id;
  int agent_type;
  double x, y;
  bool valid;
  int state;  // -1 when empty
  std::size_t line;
};

}  // namespace

std::vector<TrajectorySequence> load_sequences(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail_at(path, 1, "missing header");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"seq_id", "frame", "agent_id", "x", "y"}) {
    if (!col.count(required)) fail_at(path, 1, std::string("missing column ") + required);
  }
  const bool has_type = col.count("agent_type") > 0;
  const bool has_valid = col.count("valid") > 0;
  const bool has_state = col.count("state") > 0;

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Row>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      fail_at(path, line_no, "expected " + std::to_string(header.size()) + " cells, got " +
                                 std::to_string(cells.size()));
    }
    Row r{};
    r.line = line_no;
    const std::string& id = cells[col["seq_id"]];
    if (id.empty()) fail_at(path, line_no, "empty seq_id");
    r.frame = parse_int(cells[col["frame"]], path, line_no, "frame");
    r.agent_id = parse_int(cells[col["agent_id"]], path, line_no, "agent_id");
    r.agent_type = has_type ? static_cast<int>(parse_int(cells[col["agent_type"]], path,
                                                         line_no, "agent_type"))
                            : -1;
    if (has_type && (r.agent_type < 0 || r.agent_type > 2)) {
      fail_at(path, line_no, "agent_type must be 0, 1 or 2");
    }
    r.valid = has_valid ? parse_int(cells[col["valid"]], path, line_no, "valid") != 0 : true;
    const std::string& xs = cells[col["x"]];
    const std::string& ys = cells[col["y"]];
    if (r.valid) {
      r.x = parse_real(xs, path, line_no, "x");
      r.y = parse_real(ys, path, line_no, "y");
      if (!std::isfinite(r.x) || !std::isfinite(r.y)) {
        fail_at(path, line_no, "non-finite position on a valid row");
      }
    } else {
      r.x = xs.empty() ? 0.0 : parse_real(xs, path, line_no, "x");
      r.y = ys.empty() ? 0.0 : parse_real(ys, path, line_no, "y");
    }
    r.state = -1;
    if (has_state && !cells[col["state"]].empty()) {
      r.state = static_cast<int>(parse_int(cells[col["state"]], path, line_no, "state"));
      if (r.state < 0 || r.state >= static_cast<int>(kGameStateCount)) {
        fail_at(path, line_no, "state must be in 0..3");
      }
    }
    if (!rows.count(id)) order.push_back(id);
    rows[id].push_back(r);
  }

  std::vector<TrajectorySequence> out;
  for (const auto& id : order) {
    const auto& rs = rows[id];
    std::vector<long> agent_ids;
    long max_frame = -1;
    for (const auto& r : rs) {
      if (r.frame < 0) fail_at(path, r.line, "negative frame");
      max_frame = std::max(max_frame, r.frame);
      if (std::find(agent_ids.begin(), agent_ids.end(), r.agent_id) == agent_ids.end()) {
        agent_ids.push_back(r.agent_id);
      }
    }
    std::sort(agent_ids.begin(), agent_ids.end());
    TrajectorySequence seq;
    seq.seq_id = id;
    seq.frames = static_cast<std::size_t>(max_frame + 1);
    seq.agents = agent_ids.size();
    seq.frame_rate_hz = opts.frame_rate_hz;
    seq.pitch = opts.pitch;
    seq.positions.assign(seq.frames * seq.agents * 2, 0.0);
    seq.agent_ids.assign(agent_ids.begin(), agent_ids.end());
    seq.agent_types.assign(seq.agents, -2);
    seq.validity = BinaryGrid(seq.frames, seq.agents);
    std::vector<int> states(seq.frames, -2);
    std::vector<std::uint8_t> seen(seq.frames * seq.agents, 0);
    for (const auto& r : rs) {
      const auto n = static_cast<std::size_t>(
          std::lower_bound(agent_ids.begin(), agent_ids.end(), r.agent_id) - agent_ids.begin());
      const auto t = static_cast<std::size_t>(r.frame);
      if (seen[t * seq.agents + n]) fail_at(path, r.line, "duplicate (frame, agent_id) row");
      seen[t * seq.agents + n] = 1;
      if (seq.agent_types[n] == -2) {
        seq.agent_types[n] = r.agent_type;
      } else if (seq.agent_types[n] != r.agent_type) {
        fail_at(path, r.line, "agent_type changes within a sequence");
      }
      if (states[t] == -2) {
        states[t] = r.state;
      } else if (states[t] != r.state) {
        fail_at(path, r.line, "state differs between agents of the same frame");
      }
      seq.positions[(t * seq.agents + n) * 2] = r.x;
      seq.positions[(t * seq.agents + n) * 2 + 1] = r.y;
      seq.validity.set(t, n, r.valid);
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
      fail_at(path, rs.front().line, "sequence " + id + " is missing (frame, agent) rows");
    }
    const bool any_labeled = std::any_of(states.begin(), states.end(), [](int s) { return s >= 0; });
    const bool all_labeled = std::all_of(states.begin(), states.end(), [](int s) { return s >= 0; });
    if (any_labeled && !all_labeled) {
      fail_at(path, rs.front().line, "sequence " + id + " is only partially labeled");
    }
    if (all_labeled) seq.states = states;
    standardize_agent_order(seq);
    try {
      seq.validate();
    } catch (const DataError& e) {
      fail_at(path, rs.front().line, e.what());
    }
    out.push_back(std::move(seq));
  }
  return out;
}

void save_sequences(const std::vector<TrajectorySequence>& seqs, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "seq_id,frame,agent_id,agent_type,x,y,valid,state\n";
  char buf[64];
  for (const auto& s : seqs) {
    s.validate();
    for (std::size_t t = 0; t < s.frames; ++t) {
      for (std::size_t n = 0; n < s.agents; ++n) {
        os << s.seq_id << ',' << t << ',' << s.agent_ids[n] << ',';
        if (s.agent_types[n] >= 0) os << s.agent_types[n];
        os << ',';
        const bool valid = s.validity.at(t, n) != 0;
        if (valid) {
          std::snprintf(buf, sizeof(buf), "%.6f,%.6f", s.x(t, n), s.y(t, n));
          os << buf;
        } else {
          os << ',';
        }
        os << ',' << (valid ? 1 : 0) << ',';
        if (s.labeled()) os << s.states[t];
        os << '\n';
      }
    }
  }
  if (!os) throw IoError("write failed for " + path);
}

std::vector<double> normalize_positions(std::span<const double> positions, const PitchSpec& p) {
  p.validate();
  if (positions.size() % 2 != 0) throw ShapeError("positions must hold (x, y) pairs");
  std::vector<double> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); i += 2) {
    out[i] = normalize_x(p, positions[i]);
    out[i + 1] = normalize_y(p, positions[i + 1]);
  }
  return out;
}

std::vector<double> denormalize_positions(std::span<const double> normalized,
                                          const PitchSpec& p) {
  p.validate();
  if (normalized.size() % 2 != 0) throw ShapeError("positions must hold (x, y) pairs");
  std::vector<double> out(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); i += 2) {
    out[i] = denormalize_x(p, normalized[i]);
    out[i + 1] = denormalize_y(p, normalized[i + 1]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Possession-game generator

namespace {

struct Vec2 {
  double x = 0.0, y = 0.0;
};
Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }
Vec2 unit(Vec2 a, Vec2 fallback) {
  const double n = norm(a);
  return n > 1e-9 ? (1.0 / n) * a : fallback;
}
Vec2 clamp_norm(Vec2 a, double limit) {
  const double n = norm(a);
  return n > limit ? (limit / n) * a : a;
}

constexpr double kPlayerMaxSpeed = 7.0;     // m/s
constexpr double kPlayerMaxAccel = 5.0;     // m/s^2
constexpr double kPassMinSpeed = 8.0;       // below this a pass becomes a loose ball
constexpr double kPassDecel = 1.5;
constexpr double kLooseDecel = 5.0;
constexpr double kOutDecel = 12.0;
constexpr double kReceiveRadius = 1.8;
constexpr int kSubsteps = 4;
constexpr std::size_t kBurnInFrames = 12;

enum class Regime { kPass, kPossession, kLoose, kOut };

struct Player {
  Vec2 p, v;
  int team = 0;  // 0 offense (attacks +x), 1 defense
  bool keeper = false;
  Vec2 base;
  double amp = 3.0, omega = 0.6, phase_x = 0.0, phase_y = 0.0;
  Vec2 noise;
};

struct Ball {
  Vec2 p, v;
  Regime regime = Regime::kPossession;
  int carrier = -1;
  int kicker = -1;
  int receiver = -1;
  int last_team = 0;
  Vec2 pass_target;
  double clock = 0.0;     // seconds since the current kick
  int frames_left = 0;    // possession or out-of-play countdown
  Vec2 exit_point;
};

class GameSim {
 public:
  GameSim(const GeneratorConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(seed), dt_(1.0 / cfg.frame_rate_hz) {
    setup();
  }

  void step_frame() {
    // Regime changes happen at frame boundaries so each label describes the
    // motion that ends at its frame.
    if (ball_.regime == Regime::kPossession) {
      maybe_tackle();
      if (--ball_.frames_left <= 0) release_ball();
    } else if (ball_.regime == Regime::kOut) {
      if (--ball_.frames_left <= 0) restart();
    }
    frame_noise();
    const double h = dt_ / kSubsteps;
    for (int s = 0; s < kSubsteps; ++s) substep(h);
    ++frame_;
  }

  int state() const {
    switch (ball_.regime) {
      case Regime::kPass: return static_cast<int>(GameState::kPass);
      case Regime::kPossession: return static_cast<int>(GameState::kPossession);
      case Regime::kLoose: return static_cast<int>(GameState::kUncontrolled);
      case Regime::kOut: return static_cast<int>(GameState::kOutOfPlay);
    }
    return 0;
  }

  Vec2 ball_pos() const { return ball_.p; }
  const std::vector<Player>& players() const { return players_; }

 private:
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int uniform_int(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  double gauss(double s) { return std::normal_distribution<double>(0.0, s)(rng_); }

  Vec2 attack_dir(int team) const { return team == 0 ? Vec2{1.0, 0.0} : Vec2{-1.0, 0.0}; }

  void setup() {
    const double L = cfg_.pitch.length, W = cfg_.pitch.width;
    const std::size_t n = cfg_.n_per_team;
    for (int team = 0; team < 2; ++team) {
      for (std::size_t j = 0; j < n; ++j) {
        Player pl;
        pl.team = team;
        pl.keeper = (j == 0 && n >= 5);
        double fx, fy;
        if (pl.keeper) {
          fx = 0.05, fy = 0.5;
        } else {
          const std::size_t outfield = pl.keeper ? j - 1 : (n >= 5 ? j - 1 : j);
          const std::size_t count = n >= 5 ? n - 1 : n;
          const std::size_t per_line = std::min<std::size_t>(4, count);
          const std::size_t lines = (count + per_line - 1) / per_line;
          const std::size_t line = outfield / per_line;
          const std::size_t in_line = outfield % per_line;
          const std::size_t line_size = std::min(per_line, count - line * per_line);
          fx = 0.18 + 0.55 * (static_cast<double>(line) + 0.5) / static_cast<double>(lines);
          fy = (static_cast<double>(in_line) + 1.0) / (static_cast<double>(line_size) + 1.0);
        }
        if (team == 1) fx = 1.0 - fx;
        pl.base = {fx * L + uniform(-0.03, 0.03) * L, fy * W + uniform(-0.04, 0.04) * W};
        pl.p = pl.base + Vec2{uniform(-0.05, 0.05) * L, uniform(-0.05, 0.05) * W};
        pl.v = {gauss(1.0), gauss(1.0)};
        pl.amp = uniform(0.02, 0.06) * L;
        pl.omega = 2.0 * std::numbers::pi / uniform(5.0, 12.0);
        pl.phase_x = uniform(0.0, 2.0 * std::numbers::pi);
        pl.phase_y = uniform(0.0, 2.0 * std::numbers::pi);
        players_.push_back(pl);
      }
    }
    // Kick-off: an outfield attacker holds the ball.
    std::vector<int> candidates;
    for (std::size_t i = 0; i < players_.size(); ++i) {
      if (players_[i].team == 0 && !players_[i].keeper) candidates.push_back(static_cast<int>(i));
    }
    give_possession(candidates[static_cast<std::size_t>(
        uniform_int(0, static_cast<int>(candidates.size()) - 1))]);
    ball_.p = players_[static_cast<std::size_t>(ball_.carrier)].p;
    for (std::size_t f = 0; f < kBurnInFrames; ++f) step_frame();
  }

  void frame_noise() {
    for (auto& pl : players_) pl.noise = {gauss(1.2), gauss(1.2)};
  }

  void give_possession(int player) {
    ball_.regime = Regime::kPossession;
    ball_.carrier = player;
    ball_.kicker = -1;
    ball_.receiver = -1;
    ball_.last_team = players_[static_cast<std::size_t>(player)].team;
    ball_.frames_left = uniform_int(4, 12);
  }

  int nearest_player(Vec2 at, int team, int exclude) const {
    int best = -1;
    double best_d = 1e300;
    for (std::size_t i = 0; i < players_.size(); ++i) {
      if (static_cast<int>(i) == exclude) continue;
      if (team >= 0 && players_[i].team != team) continue;
      const double d = norm(players_[i].p - at);
      if (d < best_d) best_d = d, best = static_cast<int>(i);
    }
    return best;
  }

  void kick_pass(Vec2 from, int receiver, int kicker) {
    const Player& r = players_[static_cast<std::size_t>(receiver)];
    const Vec2 target = r.p + 0.6 * r.v;
    const double dist = norm(target - from);
    const double speed = std::clamp(8.5 + 0.45 * dist, 10.0, 20.0);
    ball_.regime = Regime::kPass;
    ball_.p = from;
    ball_.v = speed * unit(target - from, attack_dir(ball_.last_team));
    ball_.pass_target = target;
    ball_.receiver = receiver;
    ball_.kicker = kicker;
    ball_.carrier = -1;
    ball_.clock = 0.0;
  }

  void release_ball() {
    const int carrier = ball_.carrier;
    const Player& c = players_[static_cast<std::size_t>(carrier)];
    if (uniform(0.0, 1.0) < 0.88) {
      // Pass to a teammate, favoring close and forward options.
      std::vector<double> weights;
      std::vector<int> mates;
      for (std::size_t i = 0; i < players_.size(); ++i) {
        if (static_cast<int>(i) == carrier || players_[i].team != c.team) continue;
        const Vec2 d = players_[i].p - c.p;
        const double forward = d.x * attack_dir(c.team).x;
        weights.push_back(std::exp(-norm(d) / 18.0) * (forward > 0 ? 1.6 : 1.0));
        mates.push_back(static_cast<int>(i));
      }
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      kick_pass(ball_.p, mates[pick(rng_)], carrier);
    } else {
      const double angle = uniform(-1.5, 1.5);
      const Vec2 dir = attack_dir(c.team);
      const Vec2 kick{dir.x * std::cos(angle) - dir.y * std::sin(angle),
                      dir.x * std::sin(angle) + dir.y * std::cos(angle)};
      ball_.regime = Regime::kLoose;
      ball_.v = uniform(6.0, 12.0) * kick;
      ball_.kicker = carrier;
      ball_.carrier = -1;
      ball_.receiver = -1;
      ball_.clock = 0.0;
    }
  }

  void maybe_tackle() {
    const Player& c = players_[static_cast<std::size_t>(ball_.carrier)];
    const int presser = nearest_player(c.p, 1 - c.team, -1);
    if (presser >= 0 && norm(players_[static_cast<std::size_t>(presser)].p - c.p) < 1.5 &&
        uniform(0.0, 1.0) < 0.3) {
      give_possession(presser);
    }
  }

  void restart() {
    const int team = 1 - ball_.last_team;
    const Vec2 from = ball_.exit_point;
    const int receiver = nearest_player(from, team, -1);
    ball_.last_team = team;
    kick_pass(from, receiver, -1);
  }

  Vec2 target_for(std::size_t i, double t) const {
    const Player& pl = players_[i];
    const double L = cfg_.pitch.length, W = cfg_.pitch.width;
    const double shift_scale = pl.keeper ? 0.08 : 0.35;
    Vec2 anchor = pl.base + Vec2{shift_scale * (ball_.p.x - 0.5 * L),
                                 0.6 * shift_scale * (ball_.p.y - 0.5 * W)};
    anchor = anchor + Vec2{pl.amp * std::sin(pl.omega * t + pl.phase_x),
                           pl.amp * std::sin(0.8 * pl.omega * t + pl.phase_y)};
    const int idx = static_cast<int>(i);
    switch (ball_.regime) {
      case Regime::kPossession: {
        if (idx == ball_.carrier) {
          return pl.p + 6.0 * attack_dir(pl.team) +
                 Vec2{0.0, 3.0 * std::sin(pl.omega * 2.0 * t + pl.phase_y)};
        }
        const Player& c = players_[static_cast<std::size_t>(ball_.carrier)];
        if (pl.team != c.team && !pl.keeper &&
            idx == nearest_player(c.p, pl.team, -1)) {
          return c.p;
        }
        break;
      }
      case Regime::kPass:
        if (idx == ball_.receiver) return ball_.pass_target;
        break;
      case Regime::kLoose:
        if (!pl.keeper && idx == nearest_player(ball_.p, pl.team, -1)) return ball_.p;
        break;
      case Regime::kOut:
        break;
    }
    return anchor;
  }

  void substep(double h) {
    const double t = (static_cast<double>(frame_) + 0.0) * dt_;
    const double L = cfg_.pitch.length, W = cfg_.pitch.width;
    std::vector<Vec2> acc(players_.size());
    for (std::size_t i = 0; i < players_.size(); ++i) {
      const Player& pl = players_[i];
      const Vec2 target = target_for(i, t);
      Vec2 a = 0.9 * (target - pl.p) - 1.3 * pl.v + pl.noise;
      for (std::size_t j = 0; j < players_.size(); ++j) {
        if (j == i) continue;
        const Vec2 d = pl.p - players_[j].p;
        const double dn = norm(d);
        if (dn < 2.5 && dn > 1e-9) a = a + (3.0 * (2.5 - dn) / dn) * d;
      }
      acc[i] = clamp_norm(a, kPlayerMaxAccel);
    }
    for (std::size_t i = 0; i < players_.size(); ++i) {
      Player& pl = players_[i];
      pl.v = clamp_norm(pl.v + h * acc[i], kPlayerMaxSpeed);
      pl.p = pl.p + h * pl.v;
      if (pl.p.x < 0.5 || pl.p.x > L - 0.5) {
        pl.p.x = std::clamp(pl.p.x, 0.5, L - 0.5);
        pl.v.x = 0.0;
      }
      if (pl.p.y < 0.5 || pl.p.y > W - 0.5) {
        pl.p.y = std::clamp(pl.p.y, 0.5, W - 0.5);
        pl.v.y = 0.0;
      }
    }
    move_ball(h);
  }

  void move_ball(double h) {
    const double L = cfg_.pitch.length, W = cfg_.pitch.width;
    switch (ball_.regime) {
      case Regime::kPossession: {
        const Player& c = players_[static_cast<std::size_t>(ball_.carrier)];
        const Vec2 heading = unit(c.v, attack_dir(c.team));
        ball_.p = c.p + 0.7 * heading;
        ball_.p.x = std::clamp(ball_.p.x, 0.0, L);
        ball_.p.y = std::clamp(ball_.p.y, 0.0, W);
        ball_.v = c.v;
        return;
      }
      case Regime::kPass:
      case Regime::kLoose: {
        const double decel = ball_.regime == Regime::kPass ? kPassDecel : kLooseDecel;
        ball_.p = ball_.p + h * ball_.v;
        const double speed = norm(ball_.v);
        ball_.v = (std::max(0.0, speed - decel * h) / std::max(speed, 1e-12)) * ball_.v;
        ball_.clock += h;
        if (!cfg_.pitch.contains(ball_.p.x, ball_.p.y)) {
          ball_.regime = Regime::kOut;
          ball_.frames_left = uniform_int(4, 9);
          ball_.exit_point = {std::clamp(ball_.p.x, 0.3, L - 0.3),
                              std::clamp(ball_.p.y, 0.3, W - 0.3)};
          return;
        }
        if (ball_.regime == Regime::kPass && norm(ball_.v) < kPassMinSpeed) {
          ball_.regime = Regime::kLoose;
        }
        int best = -1;
        double best_d = kReceiveRadius;
        for (std::size_t i = 0; i < players_.size(); ++i) {
          if (static_cast<int>(i) == ball_.kicker && ball_.clock < 0.5) continue;
          const double d = norm(players_[i].p - ball_.p);
          if (d < best_d) best_d = d, best = static_cast<int>(i);
        }
        if (best >= 0) give_possession(best);
        return;
      }
      case Regime::kOut: {
        ball_.p = ball_.p + h * ball_.v;
        const double speed = norm(ball_.v);
        ball_.v = (std::max(0.0, speed - kOutDecel * h) / std::max(speed, 1e-12)) * ball_.v;
        return;
      }
    }
  }

  const GeneratorConfig& cfg_;
  std::mt19937_64 rng_;
  double dt_;
  std::size_t frame_ = 0;
  std::vector<Player> players_;
  Ball ball_;
};

TrajectorySequence empty_sequence(const GeneratorConfig& cfg, std::size_t index) {
  TrajectorySequence seq;
  seq.seq_id = "s" + std::to_string(index);
  seq.frames = cfg.frames;
  seq.agents = 1 + 2 * cfg.n_per_team;
  seq.frame_rate_hz = cfg.frame_rate_hz;
  seq.pitch = cfg.pitch;
  seq.positions.assign(seq.frames * seq.agents * 2, 0.0);
  seq.validity = BinaryGrid(seq.frames, seq.agents, 1);
  seq.agent_ids.resize(seq.agents);
  seq.agent_types.resize(seq.agents);
  for (std::size_t n = 0; n < seq.agents; ++n) {
    seq.agent_ids[n] = static_cast<int>(n);
    seq.agent_types[n] = n == 0 ? 0 : (n <= cfg.n_per_team ? 1 : 2);
  }
  return seq;
}

TrajectorySequence simulate_game(const GeneratorConfig& cfg, std::size_t index,
                                 std::uint64_t seed) {
  TrajectorySequence seq = empty_sequence(cfg, index);
  GameSim sim(cfg, seed);
  seq.states.resize(seq.frames);
  for (std::size_t t = 0; t < seq.frames; ++t) {
    if (t > 0) sim.step_frame();
    const Vec2 b = sim.ball_pos();
    seq.positions[(t * seq.agents) * 2] = b.x;
    seq.positions[(t * seq.agents) * 2 + 1] = b.y;
    for (std::size_t i = 0; i < sim.players().size(); ++i) {
      seq.positions[(t * seq.agents + i + 1) * 2] = sim.players()[i].p.x;
      seq.positions[(t * seq.agents + i + 1) * 2 + 1] = sim.players()[i].p.y;
    }
    seq.states[t] = sim.state();
  }
  return seq;
}

TrajectorySequence constant_velocity_sequence(const GeneratorConfig& cfg, std::size_t index,
                                              std::uint64_t seed) {
  TrajectorySequence seq = empty_sequence(cfg, index);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, cfg.pitch.length), uy(0.0, cfg.pitch.width);
  std::uniform_real_distribution<double> uv(-4.0, 4.0);
  const double dt = 1.0 / cfg.frame_rate_hz;
  for (std::size_t n = 0; n < seq.agents; ++n) {
    const double x0 = ux(rng), y0 = uy(rng), vx = uv(rng), vy = uv(rng);
    for (std::size_t t = 0; t < seq.frames; ++t) {
      const double tt = static_cast<double>(t) * dt;
      seq.positions[(t * seq.agents + n) * 2] = x0 + vx * tt;
      seq.positions[(t * seq.agents + n) * 2 + 1] = y0 + vy * tt;
    }
  }
  return seq;
}

}  // namespace

std::vector<TrajectorySequence> generate_possession_game(const GeneratorConfig& cfg) {
  if (cfg.n_per_team < 2) throw ConfigError("possession game needs at least 2 players per team");
  if (cfg.frames < 2) throw ConfigError("sequences need at least 2 frames");
  if (!(cfg.frame_rate_hz > 0.0)) throw ConfigError("frame rate must be positive");
  cfg.pitch.validate();
  std::vector<TrajectorySequence> out;
  out.reserve(cfg.n_sequences);
  for (std::size_t i = 0; i < cfg.n_sequences; ++i) {
    if (cfg.mode == GeneratorMode::kConstantVelocity) {
      out.push_back(constant_velocity_sequence(cfg, i, mix_seed(cfg.seed, i, 0)));
      continue;
    }
    // Resample until the sequence shows both a pass and a possession.
    for (std::uint64_t attempt = 0;; ++attempt) {
      TrajectorySequence seq = simulate_game(cfg, i, mix_seed(cfg.seed, i, attempt));
      if (check_game_labels(seq).empty()) {
        out.push_back(std::move(seq));
        break;
      }
      if (attempt > 1000) throw ConfigError("generator cannot satisfy label post-conditions");
    }
  }
  return out;
}

std::string check_game_labels(const TrajectorySequence& seq) {
  if (seq.states.size() != seq.frames) return "missing state labels";
  const std::size_t ball = seq.ball_index();
  if (ball == seq.agents) return "no unique ball agent";
  bool pass = false, possession = false;
  for (std::size_t t = 0; t < seq.frames; ++t) {
    const int s = seq.states[t];
    pass = pass || s == static_cast<int>(GameState::kPass);
    possession = possession || s == static_cast<int>(GameState::kPossession);
    const bool outside = !seq.pitch.contains(seq.x(t, ball), seq.y(t, ball));
    if (outside != (s == static_cast<int>(GameState::kOutOfPlay))) {
      return "frame " + std::to_string(t) + ": out-of-play label disagrees with ball position";
    }
    // A restart frame starts from the throw-in spot, not from the previous
    // ball position, so its finite difference says nothing about pass speed.
    const bool restart = t > 0 && seq.states[t - 1] == static_cast<int>(GameState::kOutOfPlay);
    if (t > 0 && !restart && s == static_cast<int>(GameState::kPass)) {
      const double ball_speed =
          std::hypot(seq.x(t, ball) - seq.x(t - 1, ball), seq.y(t, ball) - seq.y(t - 1, ball));
      double fastest = 0.0;
      for (std::size_t n = 0; n < seq.agents; ++n) {
        if (n == ball) continue;
        fastest = std::max(fastest, std::hypot(seq.x(t, n) - seq.x(t - 1, n),
                                               seq.y(t, n) - seq.y(t - 1, n)));
      }
      if (!(ball_speed > fastest)) {
        return "frame " + std::to_string(t) + ": pass slower than the fastest player";
      }
    }
  }
  if (!pass) return "no pass segment";
  if (!possession) return "no possession segment";
  return {};
}

std::vector<double> velocity_baseline(std::span<const double> positions, std::size_t frames,
                                      std::size_t agents, const ObservationMask& m,
                                      const BinaryGrid* nan) {
  if (positions.size() != frames * agents * 2) throw ShapeError("positions must be [T x N x 2]");
  if (m.rows() != frames || m.cols() != agents) throw ShapeError("mask must be [T x N]");
  auto known = [&](std::size_t t, std::size_t n) {
    return !m.at(t, n) && !(nan && nan->at(t, n));
  };
  auto px = [&](std::size_t t, std::size_t n) { return positions[(t * agents + n) * 2]; };
  auto py = [&](std::size_t t, std::size_t n) { return positions[(t * agents + n) * 2 + 1]; };

  std::vector<double> out(positions.begin(), positions.end());
  std::vector<std::size_t> unseen;
  for (std::size_t n = 0; n < agents; ++n) {
    bool any = false;
    for (std::size_t t = 0; t < frames; ++t) any = any || known(t, n);
    if (!any) {
      unseen.push_back(n);
      continue;
    }
    std::size_t t = 0;
    while (t < frames) {
      if (known(t, n)) {
        ++t;
        continue;
      }
      const std::size_t a = t;
      while (t < frames && !known(t, n)) ++t;
      const std::size_t b = t;  // gap is [a, b)
      for (std::size_t k = a; k < b; ++k) {
        double x, y;
        if (a >= 2 && known(a - 1, n) && known(a - 2, n)) {
          const double steps = static_cast<double>(k - a + 1);
          x = px(a - 1, n) + steps * (px(a - 1, n) - px(a - 2, n));
          y = py(a - 1, n) + steps * (py(a - 1, n) - py(a - 2, n));
        } else if (a >= 1) {
          x = px(a - 1, n), y = py(a - 1, n);
        } else {
          x = px(b, n), y = py(b, n);  // leading gap: hold the first observation
        }
        out[(k * agents + n) * 2] = x;
        out[(k * agents + n) * 2 + 1] = y;
      }
    }
  }
  for (auto n : unseen) {
    double last_x = 0.0, last_y = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      double sx = 0.0, sy = 0.0;
      std::size_t c = 0;
      for (std::size_t k = 0; k < agents; ++k) {
        if (known(t, k)) sx += px(t, k), sy += py(t, k), ++c;
      }
      if (c > 0) last_x = sx / static_cast<double>(c), last_y = sy / static_cast<double>(c);
      out[(t * agents + n) * 2] = last_x;
      out[(t * agents + n) * 2 + 1] = last_y;
    }
  }
  return out;
}

DatasetSplit split_dataset(std::size_t n_items, const std::array<double, 3>& ratios,
                           std::uint64_t seed, const std::vector<std::string>& groups) {
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  if (!groups.empty() && groups.size() != n_items) {
    throw ConfigError("one group key per item is required");
  }
  std::vector<std::string> keys = groups;
  if (keys.empty()) {
    for (std::size_t i = 0; i < n_items; ++i) keys.push_back(std::to_string(i));
  }
  std::vector<std::string> unique_keys;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n_items; ++i) {
    if (!members.count(keys[i])) unique_keys.push_back(keys[i]);
    members[keys[i]].push_back(i);
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = unique_keys.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(unique_keys[i - 1], unique_keys[j]);
  }
  const auto n = static_cast<double>(n_items);
  const auto train_target = static_cast<std::size_t>(std::llround(ratios[0] * n));
  const auto val_target = static_cast<std::size_t>(std::llround(ratios[1] * n));
  DatasetSplit split;
  split.seed = seed;
  for (const auto& k : unique_keys) {
    auto& bucket = split.train.size() < train_target                    ? split.train
                   : split.val.size() < val_target                      ? split.val
                                                                        : split.test;
    for (auto i : members[k]) bucket.push_back(i);
  }
  return split;
}

}  // namespace trajset
