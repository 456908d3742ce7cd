// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace trajset {

/// Playing surface [0, length] x [0, width] in field units.
struct PitchSpec {
  double length = 105.0;
  double width = 68.0;
  std::string unit = "meters";

  void validate() const;
  bool contains(double x, double y) const {
    return x >= 0.0 && x <= length && y >= 0.0 && y <= width;
  }
  bool operator==(const PitchSpec&) const = default;
};

/// Affine map of the pitch onto [-1, 1]^2 (center -> origin).
inline double normalize_x(const PitchSpec& p, double x) { return (x - 0.5 * p.length) / (0.5 * p.length); }
inline double normalize_y(const PitchSpec& p, double y) { return (y - 0.5 * p.width) / (0.5 * p.width); }
inline double denormalize_x(const PitchSpec& p, double u) { return u * (0.5 * p.length) + 0.5 * p.length; }
inline double denormalize_y(const PitchSpec& p, double v) { return v * (0.5 * p.width) + 0.5 * p.width; }

}  // namespace trajset
