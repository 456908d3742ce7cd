// SPDX-License-Identifier: Apache-2.0
#include "trajset/model.hpp"

#include <cmath>

#include "trajset/error.hpp"
#include "trajset/ops.hpp"

namespace trajset {

void ModelConfig::validate() const {
  if (d == 0 || heads == 0 || d % heads != 0) {
    throw ConfigError("embedding width d=" + std::to_string(d) + " must be divisible by heads=" +
                      std::to_string(heads));
  }
  if (d % 2 != 0) throw ConfigError("positional encoding needs an even width");
  if (sab_hidden == 0) throw ConfigError("sab_hidden must be positive");
  if (input_channels != 2 && input_channels != 3) {
    throw ConfigError("input_channels must be 2 or 3");
  }
  if (with_cls && state_classes < 2) throw ConfigError("state classification needs S >= 2");
  if (!(lambda_ce >= 0.0)) throw ConfigError("lambda_ce must be >= 0");
  pitch.validate();
}

namespace {

void register_encoder(const EncoderParams& e, ParameterSet& set, const std::string& prefix) {
  e.temporal1.register_into(set, prefix + ".sab_t1");
  e.temporal2.register_into(set, prefix + ".sab_t2");
  if (e.social) e.social->register_into(set, prefix + ".sab_s");
}

EncoderParams create_encoder(const ModelConfig& cfg, Rng& rng) {
  EncoderParams e;
  e.temporal1 = SabParams::create(cfg.d, cfg.heads, cfg.sab_hidden, rng);
  e.temporal2 = SabParams::create(cfg.d, cfg.heads, cfg.sab_hidden, rng);
  if (cfg.with_social) e.social = SabParams::create(cfg.d, cfg.heads, cfg.sab_hidden, rng);
  return e;
}

void build_registry(ModelParams& p) {
  p.registry = ParameterSet();
  p.input.register_into(p.registry, "input");
  if (p.cls.defined()) p.registry.add("cls", p.cls);
  register_encoder(p.coarse, p.registry, "encoder_c");
  register_encoder(p.fine, p.registry, "encoder_f");
  p.output.register_into(p.registry, "output");
  if (p.classifier) p.classifier->register_into(p.registry, "classifier");
  p.registry.add("theta", p.theta);
}

}  // namespace

ModelParams ModelParams::create(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p;
  p.input = FfnParams::create(cfg.input_channels, cfg.d, cfg.d, rng);
  if (cfg.with_cls) {
    p.cls = Tensor({cfg.d}, xavier_normal_init(1, cfg.d, cfg.d, rng), true);
  }
  p.coarse = create_encoder(cfg, rng);
  p.fine = create_encoder(cfg, rng);
  p.output = FfnParams::create(cfg.d, cfg.d, 2, rng);
  if (cfg.with_cls) p.classifier = FfnParams::create(cfg.d, cfg.d, cfg.state_classes, rng);
  p.theta = Tensor({1}, {default_uncertainty_theta()}, true);
  build_registry(p);
  return p;
}

ModelParams ModelParams::clone(const ModelConfig& cfg) const {
  ModelParams copy = create(cfg, 0);
  if (copy.registry.size() != registry.size()) throw ConfigError("clone: layout mismatch");
  for (std::size_t i = 0; i < registry.size(); ++i) {
    Tensor dst = copy.registry.items()[i].tensor;
    const auto src = registry.items()[i].tensor.values();
    std::copy(src.begin(), src.end(), dst.mutable_values().begin());
  }
  return copy;
}

std::size_t count_parameters(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d;
  const std::size_t sab = SabParams::count(d, cfg.sab_hidden);
  const std::size_t encoder = (cfg.with_social ? 3 : 2) * sab;
  std::size_t n = FfnParams::count(cfg.input_channels, d, d) + 2 * encoder +
                  FfnParams::count(d, d, 2) + 1;
  if (cfg.with_cls) n += d + FfnParams::count(d, d, cfg.state_classes);
  return n;
}

Tensor positional_encoding(std::size_t frames, std::size_t d) {
  if (d % 2 != 0) throw ConfigError("positional encoding needs an even width");
  std::vector<double> pe(frames * d);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double freq = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
      const double angle = static_cast<double>(t) / freq;
      pe[t * d + 2 * i] = std::sin(angle);
      pe[t * d + 2 * i + 1] = std::cos(angle);
    }
  }
  return Tensor({frames, d}, std::move(pe));
}

namespace {

void check_input(const ModelInput& in, const ModelConfig& cfg) {
  if (in.channels != cfg.input_channels) {
    throw ConfigError("model expects " + std::to_string(cfg.input_channels) +
                      " input channels, data has " + std::to_string(in.channels));
  }
  const std::size_t T = in.frames, N = in.agents;
  if (T == 0 || N == 0) throw ShapeError("empty model input");
  if (in.features.size() != T * N * in.channels) throw ShapeError("features must be [T x N x C]");
  if (in.mask.rows() != T || in.mask.cols() != N) throw ShapeError("mask must be [T x N]");
  if (in.nan.rows() != T || in.nan.cols() != N) throw ShapeError("NaN-mask must be [T x N]");
  for (std::size_t i = 0; i < T * N; ++i) {
    if (in.mask.bits()[i] && in.nan.bits()[i]) {
      throw TaskError("a NaN-masked slot cannot be a prediction target");
    }
  }
}

// [T x A x d] copy of the positional encoding, shared by all agents.
Tensor expanded_pe(std::size_t frames, std::size_t agents, std::size_t d) {
  Tensor pe = positional_encoding(frames, d);
  std::vector<double> out(frames * agents * d);
  const auto v = pe.values();
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t a = 0; a < agents; ++a)
      std::copy_n(v.data() + t * d, d, out.data() + (t * agents + a) * d);
  return Tensor({frames, agents, d}, std::move(out));
}

bool any_set(const BinaryGrid& g) { return g.count() > 0; }

// Temporal key mask: for agent a, key time k is excluded when flagged in
// either grid ([T x A]); the exclusion is the same for every query time.
KeyMask temporal_mask(const BinaryGrid* observation, const BinaryGrid& nan) {
  const std::size_t frames = nan.rows(), agents = nan.cols();
  std::vector<std::uint8_t> key_excluded(agents * frames, 0);
  for (std::size_t a = 0; a < agents; ++a)
    for (std::size_t t = 0; t < frames; ++t)
      key_excluded[a * frames + t] = (observation && observation->at(t, a)) || nan.at(t, a);
  return KeyMask::from_key_columns(agents, frames, frames, key_excluded);
}

// Social key mask: at frame t, NaN-masked agents are excluded as keys.
KeyMask social_mask(const BinaryGrid& nan) {
  const std::size_t frames = nan.rows(), agents = nan.cols();
  std::vector<std::uint8_t> key_excluded(frames * agents);
  std::copy(nan.bits().begin(), nan.bits().end(), key_excluded.begin());
  return KeyMask::from_key_columns(frames, agents, agents, key_excluded);
}

Tensor run_encoder(const Tensor& j, const BinaryGrid* observation, const BinaryGrid& nan,
                   const ModelConfig& cfg, const EncoderParams& e,
                   std::vector<double>* social_weights) {
  if (j.rank() != 3 || j.dim(0) != nan.rows() || j.dim(1) != nan.cols() || j.dim(2) != cfg.d) {
    throw ShapeError("encoder input " + shape_str(j.shape()) + " does not match masks");
  }
  if (observation && (observation->rows() != nan.rows() || observation->cols() != nan.cols())) {
    throw ShapeError("encoder mask shape mismatch");
  }
  const std::size_t frames = j.dim(0), agents = j.dim(1);
  Tensor x = add(j, expanded_pe(frames, agents, cfg.d));

  Tensor xt = transpose(x, 0, 1);  // [A x T x d]
  const bool masked_t = (observation && any_set(*observation)) || any_set(nan);
  KeyMask tmask = masked_t ? temporal_mask(observation, nan) : KeyMask{};
  const KeyMask* tm = masked_t ? &tmask : nullptr;
  xt = set_attention_block(xt, tm, e.temporal1);
  xt = set_attention_block(xt, tm, e.temporal2);
  x = transpose(xt, 0, 1);  // [T x A x d]

  if (e.social) {
    KeyMask smask = any_set(nan) ? social_mask(nan) : KeyMask{};
    x = set_attention_block(x, smask.empty() ? nullptr : &smask, *e.social, social_weights);
  }
  return x;
}

}  // namespace

Tensor embed_inputs(const ModelInput& in, const ModelConfig& cfg, const ModelParams& p) {
  check_input(in, cfg);
  const std::size_t T = in.frames, N = in.agents, C = in.channels;
  std::vector<double> feats(T * N * C, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t slot = t * N + n;
      const double* src = in.features.data() + slot * C;
      double* dst = feats.data() + slot * C;
      if (!in.mask.bits()[slot] && !in.nan.bits()[slot]) {
        dst[0] = normalize_x(cfg.pitch, src[0]);
        dst[1] = normalize_y(cfg.pitch, src[1]);
      }
      if (C == 3) {
        const double type = src[2];
        if (type != 0.0 && type != 1.0 && type != 2.0) {
          throw DataError("agent type " + std::to_string(type) + " outside {0, 1, 2}");
        }
        dst[2] = type;
      }
    }
  }
  for (double v : feats) {
    if (!std::isfinite(v)) throw DataError("non-finite coordinate at a visible slot");
  }
  return feed_forward(Tensor({T, N, C}, std::move(feats)), p.input);
}

Tensor append_cls(const Tensor& embedded, const ModelParams& p) {
  if (!p.cls.defined()) return embedded;
  const std::size_t T = embedded.dim(0), d = embedded.dim(2);
  Tensor cls = repeat_axis(reshape(p.cls, {1, 1, d}), 0, T);
  return concat({embedded, cls}, 1);
}

Tensor encoder_coarse(const Tensor& j, const BinaryGrid& extended_mask, const BinaryGrid& nan,
                      const ModelConfig& cfg, const ModelParams& p,
                      std::vector<double>* social_weights) {
  return run_encoder(j, &extended_mask, nan, cfg, p.coarse, social_weights);
}

Tensor encoder_fine(const Tensor& j, const BinaryGrid& nan, const ModelConfig& cfg,
                    const ModelParams& p, std::vector<double>* social_weights) {
  return run_encoder(j, nullptr, nan, cfg, p.fine, social_weights);
}

ForwardOutput forward(const ModelInput& in, const ModelConfig& cfg, const ModelParams& p,
                      bool capture_attention) {
  const std::size_t T = in.frames, N = in.agents;
  Tensor j = append_cls(embed_inputs(in, cfg, p), p);
  const bool with_cls = p.cls.defined();
  const std::size_t A = with_cls ? N + 1 : N;

  BinaryGrid observation = with_cls ? static_cast<BinaryGrid>(extend_mask_with_cls(in.mask))
                                    : static_cast<BinaryGrid>(in.mask);
  BinaryGrid nan(T, A);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < N; ++n) nan.set(t, n, in.nan.at(t, n) != 0);

  ForwardOutput out;
  Tensor coarse = encoder_coarse(j, observation, nan, cfg, p,
                                 capture_attention ? &out.coarse_social_attention : nullptr);
  Tensor fine = encoder_fine(coarse, nan, cfg, p,
                             capture_attention ? &out.fine_social_attention : nullptr);

  Tensor agents = with_cls ? slice(fine, 1, 0, N) : fine;
  const double hx = 0.5 * cfg.pitch.length, hy = 0.5 * cfg.pitch.width;
  Tensor denorm_w({2, 2}, {hx, 0.0, 0.0, hy});
  Tensor denorm_b({2}, {hx, hy});
  out.raw_predictions = affine(feed_forward(agents, p.output), denorm_w, denorm_b);

  const auto raw = out.raw_predictions.values();
  out.trajectories.assign(raw.begin(), raw.end());
  for (std::size_t slot = 0; slot < T * N; ++slot) {
    if (in.mask.bits()[slot] || in.nan.bits()[slot]) continue;
    out.trajectories[slot * 2] = in.features[slot * in.channels];
    out.trajectories[slot * 2 + 1] = in.features[slot * in.channels + 1];
  }

  if (with_cls && p.classifier) {
    Tensor cls_states = reshape(slice(fine, 1, N, 1), {T, cfg.d});
    out.state_scores = softmax_rows(feed_forward(cls_states, *p.classifier));
  }
  return out;
}

}  // namespace trajset
