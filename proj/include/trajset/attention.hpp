// SPDX-License-Identifier: Apache-2.0
//
// Masked scaled dot-product attention, multi-head attention and the Set
// Attention Block:
//
//   A(Q, K, V, M) = softmax((Q K^T + o(M)) / sqrt(d_k)) V,  o: 0 -> 0, 1 -> -inf
//   MHA(Q, K, V, M) = concat(head_1..head_H) W^O
//   SAB(X, M) = LayerNorm(H + rFFN(H)),  H = LayerNorm(X + MHA(X, X, X, M))
//
// Inputs carry a leading group axis [G x n x d]; each group is an independent
// set (one agent's time series, or all agents at one timestep).
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "trajset/params.hpp"
#include "trajset/tensor.hpp"

namespace trajset {

/// Key-exclusion mask, [groups x queries x keys]; 1 = key excluded for that
/// query. A query row with every key excluded is "fully masked": its weights
/// are all zero and its attention output is the zero vector.
struct KeyMask {
  std::size_t groups = 1;
  std::size_t queries = 0;
  std::size_t keys = 0;
  std::vector<std::uint8_t> excluded;

  static KeyMask none(std::size_t groups, std::size_t queries, std::size_t keys);
  /// Query-independent mask: key k of group g is excluded for every query.
  static KeyMask from_key_columns(std::size_t groups, std::size_t queries, std::size_t keys,
                                  const std::vector<std::uint8_t>& key_excluded);

  std::uint8_t at(std::size_t g, std::size_t q, std::size_t k) const {
    return excluded[(g * queries + q) * keys + k];
  }
  std::uint8_t& at(std::size_t g, std::size_t q, std::size_t k) {
    return excluded[(g * queries + q) * keys + k];
  }
  bool fully_masked(std::size_t g, std::size_t q) const;
  bool empty() const { return excluded.empty(); }
};

struct AttentionOutput {
  Tensor output;   // [G x n x d_v] (or [n x d_v] for rank-2 inputs)
  Tensor weights;  // [G x n x n_v] (or [n x n_v])
};

/// q [n x d_k], k [n_v x d_k], v [n_v x d_v], or the same with a leading
/// group axis. `mask` may be null (nothing excluded).
AttentionOutput masked_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                 const KeyMask* mask);

struct MhaParams {
  Tensor wq, wk, wv;  // [d x d]; columns h*d/H .. (h+1)*d/H form head h
  Tensor wo;          // [d x d]
  std::size_t heads = 1;

  static MhaParams create(std::size_t d, std::size_t heads, Rng& rng);
  static std::size_t count(std::size_t d);
  void register_into(ParameterSet& set, const std::string& prefix) const;
};

/// Head-averaged attention weights, [G x n x n_v], row-major.
using HeadAveragedWeights = std::vector<double>;

/// q, k, v: [G x n x d] / [G x n_v x d]. When `weights_out` is non-null the
/// head-averaged weights are written there.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const KeyMask* mask, const MhaParams& p,
                            HeadAveragedWeights* weights_out = nullptr);

struct SabParams {
  MhaParams mha;
  LayerNormParams ln1, ln2;
  FfnParams ffn;

  static SabParams create(std::size_t d, std::size_t heads, std::size_t hidden, Rng& rng);
  static std::size_t count(std::size_t d, std::size_t hidden);
  void register_into(ParameterSet& set, const std::string& prefix) const;
};

/// x: [G x n x d] or [n x d]. A null mask means SAB(X) = SAB(X, 0).
Tensor set_attention_block(const Tensor& x, const KeyMask* mask, const SabParams& p,
                           HeadAveragedWeights* weights_out = nullptr);

}  // namespace trajset
