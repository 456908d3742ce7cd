// SPDX-License-Identifier: Apache-2.0
//
// Small builders shared by the unit tests and the acceptance runner.
#pragma once

#include <random>
#include <vector>

#include "trajset/model.hpp"

namespace trajset::testing {

inline ModelConfig tiny_config(bool with_cls = true) {
  ModelConfig c;
  c.d = 8;
  c.heads = 2;
  c.sab_hidden = 16;
  c.state_classes = 4;
  c.with_cls = with_cls;
  return c;
}

/// Random on-pitch positions with agent 0 as the ball and alternating teams.
inline ModelInput random_input(const ModelConfig& cfg, std::size_t frames, std::size_t agents,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, cfg.pitch.length), uy(0.0, cfg.pitch.width);
  ModelInput in;
  in.frames = frames;
  in.agents = agents;
  in.channels = cfg.input_channels;
  in.features.assign(frames * agents * in.channels, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < agents; ++n) {
      double* f = in.features.data() + (t * agents + n) * in.channels;
      f[0] = ux(rng);
      f[1] = uy(rng);
      if (in.channels == 3) f[2] = n == 0 ? 0.0 : static_cast<double>(1 + n % 2);
    }
  }
  in.mask = ObservationMask(frames, agents);
  in.nan = NanMask(frames, agents);
  return in;
}

/// Reorders agents: new agent i is old agent perm[i].
inline ModelInput permute_agents(const ModelInput& in, const std::vector<std::size_t>& perm) {
  ModelInput out = in;
  const std::size_t T = in.frames, N = in.agents, C = in.channels;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t c = 0; c < C; ++c)
        out.features[(t * N + i) * C + c] = in.features[(t * N + perm[i]) * C + c];
      out.mask.set(t, i, in.mask.at(t, perm[i]) != 0);
      out.nan.set(t, i, in.nan.at(t, perm[i]) != 0);
    }
  }
  return out;
}

}  // namespace trajset::testing
