#pragma once

#include <string>
#include <string_view>
#include <type_traits>

#include "hcrnn/error.hpp"

namespace hcrnn {

enum class Precision { f32, f64 };

inline std::string_view to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

inline Precision parse_precision(std::string_view s) {
  if (s == "f32" || s == "float32" || s == "32") return Precision::f32;
  if (s == "f64" || s == "float64" || s == "64") return Precision::f64;
  throw ConfigError("unknown precision '" + std::string(s) + "' (expected f32 or f64)");
}

template <typename T>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? Precision::f32 : Precision::f64;
}

}  // namespace hcrnn
