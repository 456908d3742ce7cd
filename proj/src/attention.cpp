// SPDX-License-Identifier: Apache-2.0
#include "trajset/attention.hpp"

#include <algorithm>
#include <cmath>

#include "trajset/error.hpp"
#include "trajset/ops.hpp"

namespace trajset {

KeyMask KeyMask::none(std::size_t groups, std::size_t queries, std::size_t keys) {
  return {groups, queries, keys, std::vector<std::uint8_t>(groups * queries * keys, 0)};
}

KeyMask KeyMask::from_key_columns(std::size_t groups, std::size_t queries, std::size_t keys,
                                  const std::vector<std::uint8_t>& key_excluded) {
  if (key_excluded.size() != groups * keys) {
    throw ShapeError("key column mask must have groups*keys entries");
  }
  KeyMask m = none(groups, queries, keys);
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t q = 0; q < queries; ++q)
      for (std::size_t k = 0; k < keys; ++k) m.at(g, q, k) = key_excluded[g * keys + k];
  return m;
}

bool KeyMask::fully_masked(std::size_t g, std::size_t q) const {
  const auto* row = excluded.data() + (g * queries + q) * keys;
  return std::all_of(row, row + keys, [](std::uint8_t e) { return e != 0; });
}

namespace {

struct Grouped {
  Tensor t;
  bool was_rank2;
};

Grouped as_grouped(const Tensor& x, const char* what) {
  if (x.rank() == 2) return {reshape(x, {1, x.dim(0), x.dim(1)}), true};
  if (x.rank() == 3) return {x, false};
  throw ShapeError(std::string("attention: ") + what + " must be rank 2 or 3, got " +
                   shape_str(x.shape()));
}

}  // namespace

AttentionOutput masked_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                 const KeyMask* mask) {
  auto [qg, q2] = as_grouped(q, "queries");
  auto [kg, k2] = as_grouped(k, "keys");
  auto [vg, v2] = as_grouped(v, "values");
  const std::size_t groups = qg.dim(0), n = qg.dim(1), dk = qg.dim(2);
  const std::size_t nv = kg.dim(1);
  if (kg.dim(0) != groups || vg.dim(0) != groups || kg.dim(2) != dk || vg.dim(1) != nv) {
    throw ShapeError("attention: q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) +
                     ", v " + shape_str(v.shape()));
  }
  if (mask && !mask->empty() &&
      (mask->groups != groups || mask->queries != n || mask->keys != nv)) {
    throw ShapeError("attention: mask shape does not match [G x n x n_v]");
  }

  Tensor logits = scale(matmul(qg, transpose(kg, 1, 2)), 1.0 / std::sqrt(static_cast<double>(dk)));
  Tensor weights = (mask && !mask->empty()) ? masked_softmax_rows(logits, mask->excluded)
                                            : softmax_rows(logits);
  Tensor out = matmul(weights, vg);
  if (q2) {
    out = reshape(out, {n, vg.dim(2)});
    weights = reshape(weights, {n, nv});
  }
  return {out, weights};
}

MhaParams MhaParams::create(std::size_t d, std::size_t heads, Rng& rng) {
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("embedding width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  MhaParams p;
  p.heads = heads;
  p.wq = xavier_parameter(d, d, rng);
  p.wk = xavier_parameter(d, d, rng);
  p.wv = xavier_parameter(d, d, rng);
  p.wo = xavier_parameter(d, d, rng);
  return p;
}

std::size_t MhaParams::count(std::size_t d) { return 4 * d * d; }

void MhaParams::register_into(ParameterSet& set, const std::string& prefix) const {
  set.add(prefix + ".wq", wq);
  set.add(prefix + ".wk", wk);
  set.add(prefix + ".wv", wv);
  set.add(prefix + ".wo", wo);
}

namespace {

// [G x n x d] -> [(G*H) x n x d/H]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t g = x.dim(0), n = x.dim(1), d = x.dim(2), dh = d / heads;
  Tensor t = transpose(reshape(x, {g, n, heads, dh}), 1, 2);
  return reshape(t, {g * heads, n, dh});
}

// [(G*H) x n x d/H] -> [G x n x d]
Tensor merge_heads(const Tensor& x, std::size_t groups, std::size_t heads) {
  const std::size_t n = x.dim(1), dh = x.dim(2);
  Tensor t = transpose(reshape(x, {groups, heads, n, dh}), 1, 2);
  return reshape(t, {groups, n, heads * dh});
}

}  // namespace

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const KeyMask* mask, const MhaParams& p,
                            HeadAveragedWeights* weights_out) {
  if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3) {
    throw ShapeError("multi_head_attention expects [G x n x d] inputs");
  }
  const std::size_t d = q.dim(2);
  const std::size_t heads = p.heads;
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const std::size_t groups = q.dim(0), n = q.dim(1), nv = k.dim(1);

  Tensor qh = split_heads(affine(q, p.wq), heads);
  Tensor kh = split_heads(affine(k, p.wk), heads);
  Tensor vh = split_heads(affine(v, p.wv), heads);

  KeyMask head_mask;
  const KeyMask* use_mask = nullptr;
  if (mask && !mask->empty()) {
    if (mask->groups != groups || mask->queries != n || mask->keys != nv) {
      throw ShapeError("multi_head_attention: mask shape mismatch");
    }
    head_mask = KeyMask::none(groups * heads, n, nv);
    const std::size_t block = n * nv;
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(mask->excluded.begin() + g * block, block,
                    head_mask.excluded.begin() + (g * heads + h) * block);
    use_mask = &head_mask;
  }

  AttentionOutput att = masked_attention(qh, kh, vh, use_mask);

  if (weights_out) {
    weights_out->assign(groups * n * nv, 0.0);
    const auto w = att.weights.values();
    const std::size_t block = n * nv;
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t i = 0; i < block; ++i)
          (*weights_out)[g * block + i] += w[(g * heads + h) * block + i];
    for (auto& x : *weights_out) x /= static_cast<double>(heads);
  }
  return affine(merge_heads(att.output, groups, heads), p.wo);
}

SabParams SabParams::create(std::size_t d, std::size_t heads, std::size_t hidden, Rng& rng) {
  SabParams p;
  p.mha = MhaParams::create(d, heads, rng);
  p.ln1 = LayerNormParams::create(d);
  p.ffn = FfnParams::create(d, hidden, d, rng);
  p.ln2 = LayerNormParams::create(d);
  return p;
}

std::size_t SabParams::count(std::size_t d, std::size_t hidden) {
  return MhaParams::count(d) + 4 * d + FfnParams::count(d, hidden, d);
}

void SabParams::register_into(ParameterSet& set, const std::string& prefix) const {
  mha.register_into(set, prefix + ".mha");
  ln1.register_into(set, prefix + ".ln1");
  ffn.register_into(set, prefix + ".ffn");
  ln2.register_into(set, prefix + ".ln2");
}

Tensor set_attention_block(const Tensor& x, const KeyMask* mask, const SabParams& p,
                           HeadAveragedWeights* weights_out) {
  const bool rank2 = x.rank() == 2;
  Tensor xg = rank2 ? reshape(x, {1, x.dim(0), x.dim(1)}) : x;
  if (xg.rank() != 3) throw ShapeError("set_attention_block expects [G x n x d]");
  Tensor attended = multi_head_attention(xg, xg, xg, mask, p.mha, weights_out);
  Tensor h = layer_norm(add(xg, attended), p.ln1.gain, p.ln1.bias);
  Tensor out = layer_norm(add(h, feed_forward(h, p.ffn)), p.ln2.gain, p.ln2.bias);
  return rank2 ? reshape(out, x.shape()) : out;
}

}  // namespace trajset
