// SPDX-License-Identifier: Apache-2.0
#include "trajset/init.hpp"

#include <cmath>

#include "trajset/error.hpp"

namespace trajset {

std::vector<double> xavier_normal_init(std::size_t fan_in, std::size_t fan_out,
                                       std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return xavier_normal_init(fan_in, fan_out, fan_in * fan_out, rng);
}

std::vector<double> xavier_normal_init(std::size_t fan_in, std::size_t fan_out,
                                       std::size_t count, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw ConfigError("xavier init needs positive fans");
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> out(count);
  for (auto& v : out) v = dist(rng);
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + a * 0xBF58476D1CE4E5B9ULL +
                    b * 0x94D049BB133111EBULL + 0x2545F4914F6CDD1DULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace trajset
