// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace trajset {

using Rng = std::mt19937_64;

/// fan_in * fan_out samples from N(0, 2 / (fan_in + fan_out)).
std::vector<double> xavier_normal_init(std::size_t fan_in, std::size_t fan_out,
                                       std::uint64_t rng_seed);
std::vector<double> xavier_normal_init(std::size_t fan_in, std::size_t fan_out,
                                       std::size_t count, Rng& rng);

/// Stateless seed derivation (splitmix64 finalizer over the combined key),
/// used for per-sequence and per-epoch random streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace trajset
