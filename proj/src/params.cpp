// SPDX-License-Identifier: Apache-2.0
#include "trajset/params.hpp"

#include "trajset/error.hpp"
#include "trajset/ops.hpp"

namespace trajset {

void ParameterSet::add(std::string name, const Tensor& t) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name " + name);
  items_.push_back({std::move(name), t});
}

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.tensor.numel();
  return n;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : items_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

Tensor xavier_parameter(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  return Tensor({fan_in, fan_out}, xavier_normal_init(fan_in, fan_out, fan_in * fan_out, rng),
                true);
}

Tensor constant_parameter(Shape shape, double value) {
  return Tensor::full(std::move(shape), value, true);
}

LayerNormParams LayerNormParams::create(std::size_t d) {
  return {constant_parameter({d}, 1.0), constant_parameter({d}, 0.0)};
}

void LayerNormParams::register_into(ParameterSet& set, const std::string& prefix) const {
  set.add(prefix + ".gain", gain);
  set.add(prefix + ".bias", bias);
}

FfnParams FfnParams::create(std::size_t din, std::size_t hidden, std::size_t dout, Rng& rng) {
  FfnParams p;
  p.w1 = xavier_parameter(din, hidden, rng);
  p.b1 = constant_parameter({hidden}, 0.0);
  p.w2 = xavier_parameter(hidden, dout, rng);
  p.b2 = constant_parameter({dout}, 0.0);
  return p;
}

std::size_t FfnParams::count(std::size_t din, std::size_t hidden, std::size_t dout) {
  return din * hidden + hidden + hidden * dout + dout;
}

void FfnParams::register_into(ParameterSet& set, const std::string& prefix) const {
  set.add(prefix + ".w1", w1);
  set.add(prefix + ".b1", b1);
  set.add(prefix + ".w2", w2);
  set.add(prefix + ".b2", b2);
}

Tensor feed_forward(const Tensor& x, const FfnParams& p) {
  return affine(relu(affine(x, p.w1, p.b1)), p.w2, p.b2);
}

}  // namespace trajset
