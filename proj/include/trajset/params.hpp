// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "trajset/init.hpp"
#include "trajset/tensor.hpp"

namespace trajset {

struct Parameter {
  std::string name;
  Tensor tensor;
};

/// Ordered, uniquely named view onto learnable tensors. Tensors are shared
/// handles, so updates through the set are visible to the owning structs.
class ParameterSet {
 public:
  void add(std::string name, const Tensor& t);
  const std::vector<Parameter>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t total_elements() const;
  const Parameter* find(const std::string& name) const;
  void zero_grad();

 private:
  std::vector<Parameter> items_;
};

/// Learnable leaf initialized from the Xavier normal distribution.
Tensor xavier_parameter(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor constant_parameter(Shape shape, double value);

struct LayerNormParams {
  Tensor gain, bias;

  static LayerNormParams create(std::size_t d);
  void register_into(ParameterSet& set, const std::string& prefix) const;
};

/// Two affine layers with a rectified-linear activation between.
struct FfnParams {
  Tensor w1, b1, w2, b2;

  static FfnParams create(std::size_t din, std::size_t hidden, std::size_t dout, Rng& rng);
  static std::size_t count(std::size_t din, std::size_t hidden, std::size_t dout);
  void register_into(ParameterSet& set, const std::string& prefix) const;
};

Tensor feed_forward(const Tensor& x, const FfnParams& p);

}  // namespace trajset
