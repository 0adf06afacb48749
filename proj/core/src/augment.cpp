#include <algorithm>
#include <cmath>
#include <numbers>

#include "hcrnn/depth.hpp"

namespace hcrnn {

AugmentParams draw_augment(Rng& rng) {
  std::uniform_real_distribution<double> rot(-180.0, 180.0), shift(-10.0, 10.0), scale(0.9, 1.1);
  AugmentParams p;
  p.rotation_deg = rot(rng);
  p.tx = shift(rng);
  p.ty = shift(rng);
  p.scale = scale(rng);
  return p;
}

HandSample apply_augment(const HandSample& sample, const AugmentParams& params) {
  const std::size_t n = sample.size;
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double th = params.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double s = params.scale;

  // Depth values follow the cube: foreground scales by 1/s, background stays 1.
  auto value = [&](std::ptrdiff_t y, std::ptrdiff_t x) -> double {
    if (x < 0 || y < 0 || x >= static_cast<std::ptrdiff_t>(n) || y >= static_cast<std::ptrdiff_t>(n)) return 1.0;
    const double v = sample.patch[static_cast<std::size_t>(y) * n + static_cast<std::size_t>(x)];
    if (v == 1.0) return 1.0;
    return std::clamp(v / s, -1.0, 1.0);
  };

  HandSample out = sample;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      // Inverse map: p = c + s * R^T (p' - c - t).
      const double dx = static_cast<double>(col) - c - params.tx;
      const double dy = static_cast<double>(r) - c - params.ty;
      const double sx = c + s * (cs * dx + sn * dy);
      const double sy = c + s * (-sn * dx + cs * dy);
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double ax = sx - fx, ay = sy - fy;
      const auto x0 = static_cast<std::ptrdiff_t>(fx), y0 = static_cast<std::ptrdiff_t>(fy);
      const double a = value(y0, x0), b = value(y0, x0 + 1), cc = value(y0 + 1, x0), d = value(y0 + 1, x0 + 1);
      double v = 1.0;
      if (!(a == 1.0 && b == 1.0 && cc == 1.0 && d == 1.0)) {
        v = std::clamp((1 - ay) * ((1 - ax) * a + ax * b) + ay * ((1 - ax) * cc + ax * d), -1.0, 1.0);
      }
      out.patch[r * n + col] = v;
    }
  }

  const double px = 2.0 / static_cast<double>(n);  // normalized units per pixel
  for (std::size_t j = 0; j + 2 < out.joints_norm.size(); j += 3) {
    const double x = sample.joints_norm[j], y = sample.joints_norm[j + 1], z = sample.joints_norm[j + 2];
    out.joints_norm[j] = (cs * x - sn * y) / s + params.tx * px;
    out.joints_norm[j + 1] = (sn * x + cs * y) / s + params.ty * px;
    out.joints_norm[j + 2] = z / s;
  }
  return out;
}

HandSample augment(const HandSample& sample, std::uint64_t seed) {
  Rng rng(seed);
  return apply_augment(sample, draw_augment(rng));
}

}  // namespace hcrnn
