#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace hcrnn {

using Rng = std::mt19937_64;

/// Deterministic child seed for a named subsystem ("data", "init", "augment", ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view subsystem);

template <typename T>
void fill_uniform(std::span<T> values, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& v : values) v = static_cast<T>(dist(rng));
}

}  // namespace hcrnn
