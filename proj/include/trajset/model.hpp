// SPDX-License-Identifier: Apache-2.0
//
// Set-attention trajectory model:
//
//   J0  = rFFN_in(X)                       [T x N x d]
//   J   = concat(J0, CLS)                  [T x (N+1) x d]
//   J'  = SAB_S(SAB_T(SAB_T(J + PE, M~), M~))   coarse encoder
//   J'' = SAB_S(SAB_T(SAB_T(J' + PE)))          fine encoder
//   X^  = rFFN_out(J''[:, :N]),  s^ = softmax(rFFN_cls(J''[:, N]))
//
// SAB_T attends along time for each agent; SAB_S attends across agents at
// each timestep. Visible inputs are copied to the output unchanged.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trajset/attention.hpp"
#include "trajset/masking.hpp"
#include "trajset/params.hpp"
#include "trajset/pitch.hpp"
#include "trajset/tensor.hpp"

namespace trajset {

struct ModelConfig {
  std::size_t d = 128;
  std::size_t heads = 16;
  std::size_t sab_hidden = 512;
  std::size_t state_classes = 4;
  std::size_t input_channels = 3;  // (x, y) or (x, y, agent_type)
  double lambda_ce = 4.0;
  bool with_cls = true;
  bool with_social = true;
  bool with_unc_mask = true;
  PitchSpec pitch;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct EncoderParams {
  SabParams temporal1, temporal2;
  std::optional<SabParams> social;
};

struct ModelParams {
  FfnParams input;
  Tensor cls;  // [d], undefined without the CLS agent
  EncoderParams coarse, fine;
  FfnParams output;
  std::optional<FfnParams> classifier;
  Tensor theta;  // [1], uncertainty-mask logit
  ParameterSet registry;

  static ModelParams create(const ModelConfig& cfg, std::uint64_t seed);
  /// Deep copy with independent storage.
  ModelParams clone(const ModelConfig& cfg) const;
};

std::size_t count_parameters(const ModelConfig& cfg);

/// One sequence prepared for the network.
struct ModelInput {
  std::size_t frames = 0;
  std::size_t agents = 0;
  std::size_t channels = 2;
  /// [T x N x C]; channels 0-1 are field-unit positions, channel 2 the agent
  /// type. Values at hidden or NaN-masked slots are ignored.
  std::vector<double> features;
  ObservationMask mask;
  NanMask nan;
};

struct ForwardOutput {
  /// Network predictions before visible passthrough, field units, [T x N x 2].
  Tensor raw_predictions;
  /// Predictions with visible, non-NaN inputs copied through bit-exactly.
  std::vector<double> trajectories;
  /// [T x S] probability rows; undefined without the CLS agent.
  Tensor state_scores;
  /// Head-averaged social attention, [T x A x A] with A = N (+1 with CLS);
  /// filled only when requested.
  std::vector<double> coarse_social_attention;
  std::vector<double> fine_social_attention;
};

/// PE[t, 2i] = sin(t / 10000^(2i/d)), PE[t, 2i+1] = cos(t / 10000^(2i/d)).
Tensor positional_encoding(std::size_t frames, std::size_t d);

/// Input rFFN over normalized coordinates (hidden/NaN slots zero-filled).
Tensor embed_inputs(const ModelInput& in, const ModelConfig& cfg, const ModelParams& p);

/// Broadcasts the CLS vector over time as agent N.
Tensor append_cls(const Tensor& embedded, const ModelParams& p);

/// Coarse encoder. `extended_mask` is [T x A] (observation mask, plus the CLS
/// column when present); `nan` is [T x A].
Tensor encoder_coarse(const Tensor& j, const BinaryGrid& extended_mask, const BinaryGrid& nan,
                      const ModelConfig& cfg, const ModelParams& p,
                      std::vector<double>* social_weights = nullptr);

/// Fine encoder: unmasked apart from the NaN-mask.
Tensor encoder_fine(const Tensor& j, const BinaryGrid& nan, const ModelConfig& cfg,
                    const ModelParams& p, std::vector<double>* social_weights = nullptr);

ForwardOutput forward(const ModelInput& in, const ModelConfig& cfg, const ModelParams& p,
                      bool capture_attention = false);

}  // namespace trajset
