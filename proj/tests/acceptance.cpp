// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Pass criterion names (AC1 .. AC10) to run
// a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "trajset/attention.hpp"
#include "trajset/config_io.hpp"
#include "trajset/error.hpp"
#include "trajset/grad_check.hpp"
#include "trajset/harness.hpp"
#include "trajset/log.hpp"
#include "trajset/ops.hpp"
#include "trajset/runtime.hpp"

using namespace trajset;
using trajset::testing::permute_agents;
using trajset::testing::random_input;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string work_dir() {
  auto dir = std::filesystem::temp_directory_path() / "trajset_acceptance";
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Tensor randn(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = nd(rng);
  return Tensor(std::move(shape), std::move(v));
}

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> ud(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = ud(rng);
  return Tensor(std::move(shape), std::move(v));
}

// ---------------------------------------------------------------------------
// AC1: gradients

Outcome ac1_gradients() {
  constexpr double kStep = 1e-5, kTol = 1e-4;
  std::mt19937_64 rng(101);
  struct Case {
    std::string name;
    std::function<Tensor()> f;
    std::vector<Tensor> leaves;
  };
  std::vector<Case> cases;
  // Weighted sums make every output entry matter with a distinct weight.
  auto wrap = [&](std::string name, std::vector<Tensor> leaves,
                  std::function<Tensor(const std::vector<Tensor>&)> op) {
    Tensor y0 = op(leaves);
    Tensor w = randn(y0.shape(), rng);
    cases.push_back({std::move(name), [op, leaves, w] { return sum(mul(op(leaves), w)); }, leaves});
  };

  wrap("matmul", {randn({3, 4}, rng), randn({4, 5}, rng)},
       [](const auto& t) { return matmul(t[0], t[1]); });
  wrap("matmul_batched", {randn({2, 3, 4}, rng), randn({2, 4, 2}, rng)},
       [](const auto& t) { return matmul(t[0], t[1]); });
  wrap("affine", {randn({3, 2}, rng), randn({2, 5}, rng), randn({5}, rng)},
       [](const auto& t) { return affine(t[0], t[1], t[2]); });
  wrap("add", {randn({2, 3}, rng), randn({2, 3}, rng)}, [](const auto& t) { return add(t[0], t[1]); });
  wrap("sub", {randn({2, 3}, rng), randn({2, 3}, rng)}, [](const auto& t) { return sub(t[0], t[1]); });
  wrap("mul", {randn({2, 3}, rng), randn({2, 3}, rng)}, [](const auto& t) { return mul(t[0], t[1]); });
  wrap("div", {randn({2, 3}, rng), uniform({2, 3}, rng, 0.5, 2.0)},
       [](const auto& t) { return div(t[0], t[1]); });
  wrap("scale", {randn({4}, rng)}, [](const auto& t) { return scale(t[0], -1.7); });
  {
    // keep relu inputs away from the kink
    Tensor x = randn({10}, rng);
    for (double& v : x.mutable_values()) v += v >= 0 ? 0.1 : -0.1;
    wrap("relu", {x}, [](const auto& t) { return relu(t[0]); });
  }
  wrap("sigmoid", {randn({6}, rng)}, [](const auto& t) { return sigmoid(t[0]); });
  wrap("log_clamped", {uniform({6}, rng, 0.2, 3.0)}, [](const auto& t) { return log_clamped(t[0], 1e-12); });
  wrap("sum", {randn({2, 3}, rng)}, [](const auto& t) { return sum(t[0]); });
  wrap("mean", {randn({2, 3}, rng)}, [](const auto& t) { return mean(t[0]); });
  wrap("row_norm", {uniform({3, 2}, rng, 0.5, 2.0)}, [](const auto& t) { return row_norm(t[0]); });
  wrap("softmax_rows", {randn({3, 4}, rng)}, [](const auto& t) { return softmax_rows(t[0]); });
  {
    std::vector<std::uint8_t> excluded{0, 1, 0, 0, 1, 1, 1, 1, 0, 0, 0, 1};
    wrap("masked_softmax_rows", {randn({3, 4}, rng)},
         [excluded](const auto& t) { return masked_softmax_rows(t[0], excluded); });
  }
  wrap("layer_norm", {randn({2, 4}, rng), randn({4}, rng), randn({4}, rng)},
       [](const auto& t) { return layer_norm(t[0], t[1], t[2]); });
  wrap("reshape", {randn({2, 6}, rng)}, [](const auto& t) { return reshape(t[0], {3, 4}); });
  wrap("transpose", {randn({2, 3, 4}, rng)}, [](const auto& t) { return transpose(t[0], 0, 2); });
  wrap("concat", {randn({2, 3}, rng), randn({2, 2}, rng)},
       [](const auto& t) { return concat({t[0], t[1]}, 1); });
  wrap("split", {randn({2, 5}, rng)}, [](const auto& t) {
    auto parts = split(t[0], 1, {2, 3});
    return add(scale(parts[0], 2.0), slice(parts[1], 1, 0, 2));
  });
  wrap("slice", {randn({4, 3}, rng)}, [](const auto& t) { return slice(t[0], 0, 1, 2); });
  wrap("repeat_axis", {randn({1, 3}, rng)}, [](const auto& t) { return repeat_axis(t[0], 0, 4); });
  {
    Tensor q = randn({2, 3, 4}, rng), k = randn({2, 3, 4}, rng), v = randn({2, 3, 4}, rng);
    KeyMask m = KeyMask::from_key_columns(2, 3, 3, {0, 1, 0, 1, 1, 1});
    wrap("masked_attention", {q, k, v},
         [m](const auto& t) { return masked_attention(t[0], t[1], t[2], &m).output; });
  }

  double worst = 0.0;
  std::string worst_name;
  std::ostringstream failures;
  for (auto& c : cases) {
    auto rep = grad_check_leaves(c.f, c.leaves, kStep, kTol);
    if (rep.max_rel_error >= worst) {
      worst = rep.max_rel_error;
      worst_name = c.name;
    }
    if (!rep.passed) failures << " " << c.name;
  }

  // Full tiny model: total loss with the state term and learnable theta.
  ModelConfig cfg = trajset::testing::tiny_config(true);
  ModelParams p = ModelParams::create(cfg, 7);
  // Jitter away from the initialization: zero biases put all-zero input rows
  // (hidden ball slots) exactly on the ReLU kink.
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (const auto& item : p.registry.items()) {
    Tensor t = item.tensor;
    for (double& v : t.mutable_values()) v += jitter(rng);
  }
  Sample s;
  s.input = random_input(cfg, 6, 4, 8);
  std::bernoulli_distribution hide(0.4);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t n = 0; n < 4; ++n) s.input.mask.set(t, n, hide(rng));
  s.input.mask.set(0, 0, false);
  s.input.mask.set(5, 1, true);
  s.truth.resize(6 * 4 * 2);
  for (std::size_t i = 0; i < 6 * 4; ++i) {
    s.truth[2 * i] = s.input.features[3 * i] + 0.5;
    s.truth[2 * i + 1] = s.input.features[3 * i + 1] - 0.25;
  }
  s.states = {0, 1, 1, 2, 3, 1};
  s.roles = uncertainty_roles(s.input.mask);
  std::vector<Tensor> leaves;
  for (const auto& item : p.registry.items()) leaves.push_back(item.tensor);
  auto model_rep = grad_check_leaves(
      [&] { return sample_loss(s, forward(s.input, cfg, p), cfg, p).total; }, leaves, kStep, kTol);
  if (!model_rep.passed) failures << " tiny_model";
  const std::string fails = failures.str();
  return {fails.empty(),
          std::to_string(cases.size()) + " ops, worst " + worst_name + fmt(" %.2e", worst) +
              "; tiny model " + std::to_string(model_rep.entries) + " entries" +
              fmt(" max rel %.2e", model_rep.max_rel_error) +
              (fails.empty() ? "" : "; failed:" + fails)};
}

// ---------------------------------------------------------------------------
// AC2: permutation equivariance

ObservationMask random_task_mask(int kind, std::size_t T, std::size_t N, std::mt19937_64& rng) {
  std::vector<std::size_t> agents(N);
  std::iota(agents.begin(), agents.end(), 0);
  std::shuffle(agents.begin(), agents.end(), rng);
  const std::size_t count = 1 + rng() % (N - 1);
  std::vector<std::size_t> chosen(agents.begin(), agents.begin() + static_cast<std::ptrdiff_t>(count));
  switch (kind) {
    case 0: return build_forecasting_mask(T, 1 + rng() % (T - 1), chosen, N);
    case 1: {
      std::vector<Slot> visible;
      for (std::size_t a : chosen) {
        visible.push_back({rng() % T, a});
        for (std::size_t t = 0; t < T; ++t)
          if (rng() % 2) visible.push_back({t, a});
      }
      return build_imputation_mask(T, N, chosen, visible);
    }
    default: return build_inference_mask(T, chosen, N);
  }
}

Outcome ac2_equivariance() {
  constexpr std::size_t kInstances = 50, T = 8, N = 6;
  ModelConfig cfg;
  cfg.d = 16;
  cfg.heads = 4;
  cfg.sab_hidden = 32;
  std::mt19937_64 rng(202);
  double worst_traj = 0.0, worst_state = 0.0;
  std::size_t runs = 0;
  for (std::size_t i = 0; i < kInstances; ++i) {
    ModelParams p = ModelParams::create(cfg, 1000 + i);
    for (int kind = 0; kind < 3; ++kind) {
      ModelInput in = random_input(cfg, T, N, rng());
      in.mask = random_task_mask(kind, T, N, rng);
      std::vector<std::size_t> perm(N);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      ModelInput pin = permute_agents(in, perm);
      auto a = forward(in, cfg, p);
      auto b = forward(pin, cfg, p);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t c = 0; c < 2; ++c)
            worst_traj = std::max(worst_traj, std::abs(b.trajectories[(t * N + n) * 2 + c] -
                                                       a.trajectories[(t * N + perm[n]) * 2 + c]));
      for (std::size_t k = 0; k < a.state_scores.numel(); ++k)
        worst_state = std::max(worst_state,
                               std::abs(a.state_scores.values()[k] - b.state_scores.values()[k]));
      ++runs;
    }
  }
  const bool pass = worst_traj < 1e-9 && worst_state < 1e-9;
  return {pass, std::to_string(runs) + " runs, max traj dev" + fmt(" %.2e", worst_traj) +
                    ", max state dev" + fmt(" %.2e", worst_state)};
}

// ---------------------------------------------------------------------------
// AC3: mask semantics

Outcome ac3_mask_semantics() {
  constexpr std::size_t T = 3, N = 2, slots = T * N;
  ModelConfig cfg = trajset::testing::tiny_config(true);
  ModelParams p = ModelParams::create(cfg, 31);
  std::mt19937_64 rng(303);
  std::size_t passthrough_bad = 0, nan_bad = 0, attn_bad = 0, zero_bad = 0, cases = 0;

  // (a) every observation mask on a 3 x 2 grid
  for (unsigned bits = 0; bits < (1u << slots); ++bits) {
    ModelInput in = random_input(cfg, T, N, rng());
    for (std::size_t i = 0; i < slots; ++i) in.mask.set(i / N, i % N, (bits >> i) & 1u);
    auto out = forward(in, cfg, p);
    for (std::size_t i = 0; i < slots; ++i) {
      if ((bits >> i) & 1u) continue;
      for (std::size_t c = 0; c < 2; ++c)
        passthrough_bad += out.trajectories[i * 2 + c] != in.features[i * 3 + c];
    }
    ++cases;
  }

  // (b) every NaN pattern, with a random mask over the remaining slots
  for (unsigned bits = 0; bits < (1u << slots); ++bits) {
    ModelInput in = random_input(cfg, T, N, rng());
    for (std::size_t i = 0; i < slots; ++i) {
      const bool is_nan = (bits >> i) & 1u;
      in.nan.set(i / N, i % N, is_nan);
      in.mask.set(i / N, i % N, !is_nan && rng() % 2);
    }
    ModelInput garbled = in;
    for (std::size_t i = 0; i < slots; ++i) {
      if (!((bits >> i) & 1u)) continue;
      garbled.features[i * 3] = 1e3 * static_cast<double>(rng() % 1000) - 4e5;
      garbled.features[i * 3 + 1] = -7e2 * static_cast<double>(rng() % 1000);
    }
    auto a = forward(in, cfg, p);
    auto b = forward(garbled, cfg, p);
    for (std::size_t i = 0; i < slots; ++i) {
      if ((bits >> i) & 1u) continue;
      for (std::size_t c = 0; c < 2; ++c)
        nan_bad += a.raw_predictions.values()[i * 2 + c] != b.raw_predictions.values()[i * 2 + c];
    }
    for (std::size_t k = 0; k < a.state_scores.numel(); ++k)
      nan_bad += a.state_scores.values()[k] != b.state_scores.values()[k];
    ++cases;
  }

  // (c, d) every key mask for 2 queries over 3 keys
  constexpr std::size_t nq = 2, nk = 3, dk = 2;
  for (unsigned bits = 0; bits < (1u << (nq * nk)); ++bits) {
    KeyMask m = KeyMask::none(1, nq, nk);
    for (std::size_t i = 0; i < nq * nk; ++i) m.at(0, i / nk, i % nk) = (bits >> i) & 1u;
    Tensor q = randn({nq, dk}, rng), k = randn({nk, dk}, rng), v = randn({nk, dk}, rng);
    auto base = masked_attention(q, k, v, &m);
    for (std::size_t r = 0; r < nq; ++r) {
      Tensor k2 = k.clone(), v2 = v.clone();
      for (std::size_t j = 0; j < nk; ++j) {
        if (!m.at(0, r, j)) continue;
        for (std::size_t c = 0; c < dk; ++c) {
          k2.mutable_values()[j * dk + c] += 50.0;
          v2.mutable_values()[j * dk + c] -= 80.0;
        }
      }
      auto moved = masked_attention(q, k2, v2, &m);
      for (std::size_t c = 0; c < dk; ++c)
        attn_bad += base.output.values()[r * dk + c] != moved.output.values()[r * dk + c];
      if (m.fully_masked(0, r)) {
        for (std::size_t c = 0; c < dk; ++c) zero_bad += base.output.values()[r * dk + c] != 0.0;
        for (std::size_t j = 0; j < nk; ++j) zero_bad += base.weights.values()[r * nk + j] != 0.0;
      }
    }
    ++cases;
  }
  const bool pass = passthrough_bad + nan_bad + attn_bad + zero_bad == 0;
  return {pass, std::to_string(cases) + " cases; mismatches: passthrough " +
                    std::to_string(passthrough_bad) + ", nan " + std::to_string(nan_bad) +
                    ", excluded keys " + std::to_string(attn_bad) + ", zero rows " +
                    std::to_string(zero_bad)};
}

// ---------------------------------------------------------------------------
// AC4: metric and loss oracles

double dist2(const std::vector<double>& a, const std::vector<double>& b, std::size_t slot) {
  return std::hypot(a[slot * 2] - b[slot * 2], a[slot * 2 + 1] - b[slot * 2 + 1]);
}

struct MetricInstance {
  std::size_t T = 0, N = 0;
  std::vector<double> pred, truth;
  ObservationMask m;
  NanMask nan;
};

MetricInstance random_metric_instance(std::mt19937_64& rng) {
  MetricInstance x;
  x.T = 1 + rng() % 8;
  x.N = 1 + rng() % 5;
  std::normal_distribution<double> nd(0.0, 10.0);
  x.pred.resize(x.T * x.N * 2);
  x.truth.resize(x.T * x.N * 2);
  for (double& v : x.pred) v = nd(rng);
  for (double& v : x.truth) v = nd(rng);
  x.m = ObservationMask(x.T, x.N);
  x.nan = NanMask(x.T, x.N);
  for (std::size_t t = 0; t < x.T; ++t)
    for (std::size_t n = 0; n < x.N; ++n) {
      const auto r = rng() % 10;
      if (r < 4) x.m.set(t, n, true);
      else if (r == 4) x.nan.set(t, n, true);
    }
  const std::size_t t = rng() % x.T, n = rng() % x.N;
  x.m.set(t, n, true);
  x.nan.set(t, n, false);
  return x;
}

bool counted(const MetricInstance& x, std::size_t t, std::size_t n) {
  return x.m.at(t, n) && !x.nan.at(t, n);
}

double oracle_ade(const MetricInstance& x) {
  double s = 0;
  std::size_t c = 0;
  for (std::size_t t = 0; t < x.T; ++t)
    for (std::size_t n = 0; n < x.N; ++n)
      if (counted(x, t, n)) s += dist2(x.pred, x.truth, t * x.N + n), ++c;
  return s / static_cast<double>(c);
}

double oracle_fde(const MetricInstance& x) {
  double s = 0;
  std::size_t c = 0;
  for (std::size_t n = 0; n < x.N; ++n) {
    std::optional<std::size_t> last;
    for (std::size_t t = 0; t < x.T; ++t)
      if (counted(x, t, n)) last = t;
    if (last) s += dist2(x.pred, x.truth, *last * x.N + n), ++c;
  }
  return s / static_cast<double>(c);
}

std::pair<double, std::size_t> oracle_max_err(const MetricInstance& x) {
  double s = 0;
  std::size_t d = 0;
  for (std::size_t n = 0; n < x.N; ++n) {
    double mx = -1;
    for (std::size_t t = 0; t < x.T; ++t)
      if (counted(x, t, n)) mx = std::max(mx, dist2(x.pred, x.truth, t * x.N + n));
    if (mx >= 0) s += mx, ++d;
  }
  return {s / static_cast<double>(d), d};
}

double oracle_ade_loss(const MetricInstance& x, const std::vector<double>& w) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.T * x.N; ++i) num += w[i] * dist2(x.pred, x.truth, i), den += w[i];
  return num / den;
}

double oracle_ce(const std::vector<double>& s, const std::vector<double>& p, std::size_t T,
                 std::size_t S) {
  double total = 0;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < S; ++c)
      total -= s[t * S + c] * std::log(std::max(p[t * S + c], kCrossEntropyLogFloor));
  return total / static_cast<double>(T);
}

double oracle_accuracy(const std::vector<double>& s, const std::vector<double>& p, std::size_t T,
                       std::size_t S) {
  auto first_max = [&](const std::vector<double>& v, std::size_t t) {
    std::size_t best = 0;
    double bv = v[t * S];
    for (std::size_t c = 0; c < S; ++c)
      if (v[t * S + c] > bv) bv = v[t * S + c], best = c;
    return best;
  };
  std::size_t hits = 0;
  for (std::size_t t = 0; t < T; ++t) hits += first_max(s, t) == first_max(p, t);
  return static_cast<double>(hits) / static_cast<double>(T);
}

Outcome ac4_oracles() {
  constexpr double kTol = 1e-9;
  std::mt19937_64 rng(404);
  double worst = 0.0;
  std::string worst_name = "none";
  auto track = [&](const char* name, double got, double want) {
    const double e = std::abs(got - want);
    if (e > worst || !std::isfinite(got)) worst = std::isfinite(got) ? e : HUGE_VAL, worst_name = name;
  };

  // worked examples
  track("ade_loss_example", ade_loss(Tensor({1, 1, 2}, {3, 4}), std::vector<double>{0, 0},
                                     Tensor({1, 1}, {1})).item(), 5.0);
  track("ade_loss_example2", ade_loss(Tensor({2, 1, 2}, {3, 4, 1, 1}), std::vector<double>{0, 0, 1, 1},
                                      Tensor({2, 1}, {1, 0.8})).item(), 5.0 / 1.8);
  track("ce_example", ce_loss(std::vector<double>{1, 0, 0, 0}, Tensor({1, 4}, {.25, .25, .25, .25})).item(),
        std::log(4.0));
  {
    ObservationMask m(2, 1, 1);
    track("ade_example", ade_metric(std::vector<double>{3, 0, 0, 4}, std::vector<double>(4, 0.0), m), 3.5);
    ObservationMask f(1, 2, 1);
    track("fde_example", fde_metric(std::vector<double>{2, 0, 0, 4}, std::vector<double>(4, 0.0), f), 3.0);
    ObservationMask one(3, 1, 1);
    auto r = max_err_metric(std::vector<double>{1, 0, 2.5, 0, 0.5, 0}, std::vector<double>(6, 0.0), one);
    track("max_err_example", r.value, 2.5);
    track("max_err_example_d", static_cast<double>(r.d_count), 1.0);
    auto s = one_hot(std::vector<int>{0, 1, 2, 3}, 4);
    auto q = one_hot(std::vector<int>{0, 1, 2, 0}, 4);
    track("acc_example", accuracy_metric(s, q, 4), 0.75);
  }

  for (int i = 0; i < 100; ++i) {
    MetricInstance x = random_metric_instance(rng);
    track("ade_metric", ade_metric(x.pred, x.truth, x.m, &x.nan), oracle_ade(x));
    track("fde_metric", fde_metric(x.pred, x.truth, x.m, &x.nan), oracle_fde(x));
    auto me = max_err_metric(x.pred, x.truth, x.m, &x.nan);
    auto mo = oracle_max_err(x);
    track("max_err_metric", me.value, mo.first);
    track("max_err_d", static_cast<double>(me.d_count), static_cast<double>(mo.second));

    std::vector<double> w(x.T * x.N);
    std::uniform_real_distribution<double> uw(0.0, 1.0);
    for (double& v : w) v = rng() % 3 == 0 ? 0.0 : uw(rng);
    w[0] = 0.5;
    track("ade_loss",
          ade_loss(Tensor({x.T, x.N, 2}, x.pred), x.truth, Tensor({x.T, x.N}, w)).item(),
          oracle_ade_loss(x, w));

    const std::size_t S = 2 + rng() % 4, T = x.T;
    std::vector<double> probs(T * S), target(T * S, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      double z = 0;
      for (std::size_t c = 0; c < S; ++c) {
        // quantized scores produce ties and exact zeros
        probs[t * S + c] = static_cast<double>(rng() % 4);
        z += probs[t * S + c];
      }
      if (z == 0) probs[t * S] = z = 1;
      for (std::size_t c = 0; c < S; ++c) probs[t * S + c] /= z;
      if (i % 2) {
        target[t * S + rng() % S] = 1.0;
      } else {
        double tz = 0;
        for (std::size_t c = 0; c < S; ++c) tz += target[t * S + c] = uw(rng) + 0.01;
        for (std::size_t c = 0; c < S; ++c) target[t * S + c] /= tz;
      }
    }
    track("ce_loss", ce_loss(target, Tensor({T, S}, probs)).item(), oracle_ce(target, probs, T, S));
    track("accuracy_metric", accuracy_metric(target, probs, S), oracle_accuracy(target, probs, T, S));
  }
  return {worst < kTol, "worked examples + 100 random instances, worst " + worst_name +
                            fmt(" %.2e", worst)};
}

// ---------------------------------------------------------------------------
// AC5: uncertainty mask rule

Outcome ac5_uncertainty() {
  const double theta = 1.3;
  const double w1 = 1.0 / (1.0 + std::exp(-theta));
  std::size_t columns = 0, mismatches = 0;
  for (std::size_t len = 1; len <= 10; ++len) {
    for (unsigned bits = 0; bits < (1u << len); ++bits) {
      ObservationMask m(len, 1);
      for (std::size_t t = 0; t < len; ++t) m.set(t, 0, (bits >> t) & 1u);
      auto u = build_uncertainty_mask(m, theta);
      auto hidden = [&](long t) { return t >= 0 && t < static_cast<long>(len) && ((bits >> t) & 1u); };
      for (std::size_t t = 0; t < len; ++t) {
        const long i = static_cast<long>(t);
        double want = 0.0;
        if (hidden(i)) want = 1.0;
        else if (hidden(i - 1) || hidden(i + 1)) want = w1;
        else if (hidden(i - 2) || hidden(i + 2)) want = 1.0 - w1;
        mismatches += std::abs(u.entries[t] - want) > 1e-15;
      }
      ++columns;
    }
  }

  // Boundary-error fixture: a single wrong prediction on the first visible
  // neighbour of a hidden run.
  ObservationMask m(6, 1);
  for (std::size_t t = 3; t < 6; ++t) m.set(t, 0, true);
  Tensor th({1}, {theta}, true);
  std::vector<double> truth(12, 0.0), pred(12, 0.0);
  pred[2 * 2] = 2.0;
  double grad = 0.0;
  {
    Tape tape;
    TapeScope scope(tape);
    auto w = uncertainty_weights(uncertainty_roles(m), 6, 1, th);
    auto loss = ade_loss(Tensor({6, 1, 2}, pred), truth, w);
    tape.backward(loss);
    grad = th.grad()[0];
  }
  const double want_grad = 2.0 * w1 * (1 - w1) / 4.0;

  bool bounded = true;
  for (double t = -2000.0; t <= 2000.0; t += 0.5) {
    const double v = uncertainty_w1(t);
    bounded &= v > 0.0 && v < 1.0 && 1.0 - v > 0.0;
  }
  for (double t : {-HUGE_VAL, HUGE_VAL, -1e308, 1e308}) {
    const double v = uncertainty_w1(t);
    bounded &= v > 0.0 && v < 1.0;
  }
  const bool grad_ok = grad != 0.0 && std::abs(grad - want_grad) < 1e-12;
  return {mismatches == 0 && grad_ok && bounded,
          std::to_string(columns) + " columns, " + std::to_string(mismatches) +
              " mismatches; dL/dtheta" + fmt(" %.6g", grad) + fmt(" (expected %.6g)", want_grad) +
              (bounded ? "; w1 in (0,1)" : "; w1 escaped (0,1)")};
}

// ---------------------------------------------------------------------------
// AC6 / AC7: the tiny overfit fixture

// Sequences, model and schedule of the fixture. The forecasting protocol
// hides the offense after 20 observed frames; ball and defense stay visible.
constexpr std::size_t kFixtureSequences = 64;
constexpr std::size_t kFixtureFrames = 50;
constexpr std::size_t kFixturePerTeam = 5;
constexpr std::size_t kFixtureSteps = 300;
constexpr std::size_t kFixtureBatch = 16;
constexpr double kFixtureLr = 1e-3;
constexpr const char* kFixtureTask = "forecasting:t_hat=20,types=1";

std::vector<TrajectorySequence> fixture_data() {
  GeneratorConfig g;
  g.n_sequences = kFixtureSequences;
  g.frames = kFixtureFrames;
  g.n_per_team = kFixturePerTeam;
  g.seed = 11;
  return generate_possession_game(g);
}

ModelConfig fixture_model(double lambda) {
  ModelConfig m;
  m.d = 32;
  m.heads = 4;
  m.sab_hidden = 64;
  m.lambda_ce = lambda;
  m.with_cls = true;
  return m;
}

TrainConfig fixture_train() {
  TrainConfig tc;
  tc.batch_size = kFixtureBatch;
  tc.lr = kFixtureLr;
  tc.max_steps = kFixtureSteps;
  tc.epochs = (kFixtureSteps * kFixtureBatch + kFixtureSequences - 1) / kFixtureSequences + 1;
  tc.lr_decay_every = tc.epochs;  // constant rate over the short run
  tc.seed = 3;
  tc.task = TaskSpec::parse(kFixtureTask);
  return tc;
}

struct FixtureRun {
  TrainResult result;
  MetricReport model, baseline;
  double early = 0.0, late = 0.0;  // mean trajectory loss over steps 1-10 and the last 10
  double seconds = 0.0;
};

FixtureRun run_fixture(double lambda) {
  const auto t0 = std::chrono::steady_clock::now();
  auto data = fixture_data();
  ModelConfig mc = fixture_model(lambda);
  TrainConfig tc = fixture_train();
  FixtureRun run;
  run.result = train(data, {}, initial_checkpoint(mc, tc), tc);
  run.model = evaluate(run.result.final_state.params, mc, data, tc.task, 0);
  run.baseline = evaluate_baseline(data, tc.task, 0);
  const auto& steps = run.result.steps;
  const std::size_t k = std::min<std::size_t>(10, steps.size());
  for (std::size_t i = 0; i < k; ++i) {
    run.early += steps[i].l_ade / static_cast<double>(k);
    run.late += steps[steps.size() - k + i].l_ade / static_cast<double>(k);
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

std::optional<FixtureRun> g_joint_run;

Outcome ac6_overfit() {
  auto run = run_fixture(0.0);
  const double ratio = run.model.ade / run.baseline.ade;
  const bool pass = ratio < 0.25 && run.late < run.early && run.seconds < 600.0 &&
                    run.result.steps.size() == kFixtureSteps;
  return {pass, "train ADE" + fmt(" %.3f", run.model.ade) + " vs baseline" +
                    fmt(" %.3f", run.baseline.ade) + fmt(" (ratio %.3f, need < 0.25)", ratio) +
                    "; loss" + fmt(" %.3f", run.early) + " ->" + fmt(" %.3f", run.late) +
                    fmt("; %.0f s", run.seconds)};
}

Outcome ac7_joint() {
  g_joint_run = run_fixture(4.0);
  const auto& run = *g_joint_run;
  const auto& conf = run.model.confusion;
  const std::size_t S = run.model.classes;
  std::vector<std::size_t> per_class(S, 0);
  std::size_t frames = 0;
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = 0; j < S; ++j) per_class[i] += conf[i * S + j], frames += conf[i * S + j];
  const double majority =
      static_cast<double>(*std::max_element(per_class.begin(), per_class.end())) /
      static_cast<double>(frames);
  const double acc = run.model.acc.value_or(0.0);
  const bool pass = acc >= majority + 0.10 && run.late < run.early;
  return {pass, "train Acc" + fmt(" %.3f", acc) + " vs majority" + fmt(" %.3f", majority) +
                    "; trajectory loss" + fmt(" %.3f", run.early) + " ->" + fmt(" %.3f", run.late) +
                    fmt("; %.0f s", run.seconds)};
}

// ---------------------------------------------------------------------------
// AC8: ball inference

Outcome ac8_ball_inference() {
  auto data = fixture_data();
  data.resize(16);
  ModelConfig mc = fixture_model(4.0);
  TrainConfig tc = fixture_train();
  tc.task = TaskSpec::parse("inference");
  tc.max_steps = 10;
  tc.batch_size = 4;
  Checkpoint start = g_joint_run ? g_joint_run->result.final_state.copy() : initial_checkpoint(mc, tc);
  start.epoch = start.batch = 0;
  auto res = train(data, {}, start, tc);
  bool finite = true;
  for (const auto& s : res.steps) finite &= std::isfinite(s.total);
  auto report = evaluate(res.final_state.params, mc, data, tc.task, 0);
  finite &= std::isfinite(report.ade);

  double worst = 0.0;
  bool nonneg = true;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& seq = data[i];
    auto sample = prepare_sample(seq, build_task_mask(tc.task, seq, 0), mc);
    auto maps = export_attention(res.final_state.params, mc, sample, seq.ball_index());
    for (const auto* w : {&maps.coarse, &maps.fine}) {
      for (std::size_t t = 0; t < maps.frames; ++t) {
        double row = 0.0;
        for (std::size_t a = 0; a < maps.agents; ++a) {
          row += (*w)[t * maps.agents + a];
          nonneg &= (*w)[t * maps.agents + a] >= 0.0;
        }
        worst = std::max(worst, std::abs(row - 1.0));
        ++rows;
      }
    }
  }
  const bool pass = finite && nonneg && worst < 1e-6;
  return {pass, std::string(finite ? "finite" : "non-finite") + " training/eval (ADE" +
                    fmt(" %.3f)", report.ade) + "; " + std::to_string(rows) +
                    " attention rows, max |sum-1|" + fmt(" %.2e", worst)};
}

// ---------------------------------------------------------------------------
// AC9: reproducibility

Outcome ac9_reproducibility() {
  const std::string dir = work_dir();
  GeneratorConfig g;
  g.n_sequences = 10;
  g.frames = 16;
  g.n_per_team = 3;
  g.seed = 77;
  auto data = generate_possession_game(g);
  auto split = split_dataset(data.size(), {0.8, 0.2, 0.0}, 5);
  std::vector<TrajectorySequence> tr, va;
  for (auto i : split.train) tr.push_back(data[i]);
  for (auto i : split.val) va.push_back(data[i]);

  ModelConfig mc;
  mc.d = 16;
  mc.heads = 2;
  mc.sab_hidden = 32;
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 3;
  tc.seed = 12;
  tc.task = TaskSpec::parse("imputation:fraction=0.4");

  auto run = [&](const std::string& tag) {
    auto res = train(tr, va, initial_checkpoint(mc, tc), tc);
    save_checkpoint(res.final_state, dir + "/ck_" + tag + ".bin");
    auto rep = evaluate(res.final_state.params, mc, va, tc.task, 9);
    write_metric_csv({rep}, dir + "/metrics_" + tag + ".csv");
    return res;
  };
  auto first = run("a");
  run("b");
  const bool same_ck = slurp(dir + "/ck_a.bin") == slurp(dir + "/ck_b.bin");
  const bool same_csv = slurp(dir + "/metrics_a.csv") == slurp(dir + "/metrics_b.csv");

  // save/load round trip
  auto loaded = load_checkpoint(dir + "/ck_a.bin");
  save_checkpoint(loaded, dir + "/ck_a2.bin");
  const bool roundtrip = slurp(dir + "/ck_a.bin") == slurp(dir + "/ck_a2.bin");

  // interrupted run resumed from disk
  auto partial_cfg = tc;
  partial_cfg.max_steps = first.final_state.step / 2 + 1;
  auto partial = train(tr, va, initial_checkpoint(mc, tc), partial_cfg);
  save_checkpoint(partial.final_state, dir + "/ck_mid.bin");
  auto resumed = train(tr, va, load_checkpoint(dir + "/ck_mid.bin"), tc);
  save_checkpoint(resumed.final_state, dir + "/ck_resumed.bin");
  const bool resume = slurp(dir + "/ck_a.bin") == slurp(dir + "/ck_resumed.bin");

  return {same_ck && same_csv && roundtrip && resume,
          std::string("checkpoints ") + (same_ck ? "identical" : "differ") + ", metric CSVs " +
              (same_csv ? "identical" : "differ") + ", save/load " +
              (roundtrip ? "exact" : "inexact") + ", resume after step " +
              std::to_string(partial.final_state.step) + " " + (resume ? "exact" : "inexact")};
}

// ---------------------------------------------------------------------------
// AC10: default hyperparameters

Outcome ac10_defaults() {
  const ModelConfig m;
  const TrainConfig t;
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) bad.push_back(what);
  };
  expect(m.d == 128, "d");
  expect(m.heads == 16, "heads");
  expect(m.sab_hidden == 512, "sab_hidden");
  expect(m.lambda_ce == 4.0, "lambda");
  expect(t.lr == 0.001, "lr");
  expect(t.adam_eps == 1e-4, "eps");
  expect(t.lr_decay_factor == 0.5, "decay factor");
  expect(t.lr_decay_every == 20, "decay interval");
  expect(t.grad_clip == 5.0, "clip");
  expect(t.clip_mode == ClipMode::kGlobalNorm, "clip mode");
  expect(t.batch_size == 64, "batch");
  expect(t.epochs == 100, "epochs");
  expect(lr_schedule(20, t.lr, t.lr_decay_factor, t.lr_decay_every) == 0.0005, "schedule");

  // Serialized snapshot of the defaults.
  const std::string snapshot = format_key_values(to_key_values(m)) + format_key_values(to_key_values(t));
  for (const char* line : {"d = 128", "heads = 16", "sab_hidden = 512", "lambda_ce = 4",
                           "init = xavier_normal", "lr = 0.001", "adam_eps = 1e-04",
                           "lr_decay_factor = 0.5", "lr_decay_every = 20", "grad_clip = 5",
                           "clip_mode = global", "batch_size = 64", "epochs = 100"}) {
    if (snapshot.find(std::string(line) + "\n") == std::string::npos) bad.push_back(line);
  }

  // Xavier-normal statistics on the default-width weights.
  ModelParams p = ModelParams::create(m, 0);
  const Parameter* w = p.registry.find("encoder_c.sab_t1.ffn.w1");
  if (w == nullptr) {
    bad.push_back("ffn weight missing");
  } else {
    const auto v = w->tensor.values();
    double mean = 0, var = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size() - 1);
    expect(std::abs(var / (2.0 / (128.0 + 512.0)) - 1.0) < 0.05, "xavier variance");
  }
  std::string detail = "model, train and init defaults";
  for (const auto& b : bad) detail += (b == bad.front() ? "; mismatched: " : ", ") + b;
  return {bad.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  configure_runtime();
  set_log_level(LogLevel::kError);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", ac1_gradients},       {"AC2", ac2_equivariance},    {"AC3", ac3_mask_semantics},
      {"AC4", ac4_oracles},         {"AC5", ac5_uncertainty},     {"AC6", ac6_overfit},
      {"AC7", ac7_joint},           {"AC8", ac8_ball_inference},  {"AC9", ac9_reproducibility},
      {"AC10", ac10_defaults},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s [PRIMARY] %s (%.1f s)\n", name.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
