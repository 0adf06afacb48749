#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "hcrnn/depth.hpp"

namespace hcrnn::testing {

/// Sample whose patch is background except a radial blob drawn at its
/// single joint.
inline HandSample dot_sample(std::mt19937_64& rng, double radius_px = 3.0) {
  std::uniform_real_distribution<double> pos(-0.6, 0.6);
  HandSample s;
  s.size = kPatchSize;
  s.joints_norm = {pos(rng), pos(rng), pos(rng)};
  s.joints_mm = {0, 0, 0};
  s.patch.assign(kPatchSize * kPatchSize, 1.0);
  const double jx = norm_to_pixel(s.joints_norm[0]), jy = norm_to_pixel(s.joints_norm[1]);
  for (std::size_t y = 0; y < kPatchSize; ++y) {
    for (std::size_t x = 0; x < kPatchSize; ++x) {
      const double d = std::hypot(static_cast<double>(x) - jx, static_cast<double>(y) - jy);
      if (d < radius_px) s.patch[y * kPatchSize + x] = 1.0 - 2.0 * (1.0 - d / radius_px);
    }
  }
  return s;
}

/// Pixel distance between the blob's weighted centroid and the joint, or
/// nothing when the joint is too close to the border to judge.
inline std::optional<double> dot_offset(const HandSample& s, double margin_px = 6.0) {
  const double jx = norm_to_pixel(s.joints_norm[0]), jy = norm_to_pixel(s.joints_norm[1]);
  const double hi = static_cast<double>(s.size) - 1 - margin_px;
  if (jx < margin_px || jy < margin_px || jx > hi || jy > hi) return std::nullopt;
  double w = 0, cx = 0, cy = 0;
  for (std::size_t y = 0; y < s.size; ++y) {
    for (std::size_t x = 0; x < s.size; ++x) {
      const double m = 1.0 - s.patch[y * s.size + x];
      w += m;
      cx += m * static_cast<double>(x);
      cy += m * static_cast<double>(y);
    }
  }
  if (w <= 0) return std::nullopt;
  return std::hypot(cx / w - jx, cy / w - jy);
}

/// Frame with a fronto-parallel disk at depth z_mm centred on the principal
/// point; everything else is missing.
inline RawFrame disk_frame(double radius_px, double z_mm, std::size_t w = 320, std::size_t h = 240) {
  RawFrame f;
  f.depth = DepthImage(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (std::hypot(static_cast<double>(x) - f.camera.cx, static_cast<double>(y) - f.camera.cy) <= radius_px) {
        f.depth.at(y, x) = static_cast<float>(z_mm);
      }
    }
  }
  f.joints = {{0, 0, z_mm}};
  f.center = Vec3{0, 0, z_mm};
  return f;
}

/// Continuous background share of the patch for disk_frame cropped around
/// its center with cube edge `cube_mm`.
inline double disk_background_fraction(const RawFrame& f, double radius_px, double cube_mm) {
  const double side_px = f.camera.fx * cube_mm / f.center->at(2);  // cube edge in image pixels
  const double r = std::min(radius_px / side_px, 0.5);               // radius in patch units
  return 1.0 - std::numbers::pi * r * r;
}

inline double fraction_equal_one(const HandSample& s) {
  return static_cast<double>(std::count(s.patch.begin(), s.patch.end(), 1.0)) / static_cast<double>(s.patch.size());
}

}  // namespace hcrnn::testing
