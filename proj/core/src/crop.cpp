#include <algorithm>
#include <cmath>

#include "hcrnn/depth.hpp"
#include "hcrnn/error.hpp"

namespace hcrnn {

HandSample crop_normalize(const RawFrame& frame, const CropSpec& spec, std::size_t size) {
  if (!(spec.cube_size > 0)) throw ValidationError("cube_size must be positive, got " + std::to_string(spec.cube_size));
  if (size == 0) throw ValidationError("patch size must be positive");
  const DepthImage& img = frame.depth;
  const Intrinsics& cam = frame.camera;
  const double cz = spec.center[2];
  const double half = spec.cube_size / 2;
  if (!(cz > 0)) throw CropError("cube center lies at or behind the camera (z = " + std::to_string(cz) + ")");
  if (img.width == 0 || img.height == 0) throw CropError("empty depth image");

  const double u0 = cam.fx * (spec.center[0] - half) / cz + cam.cx;
  const double u1 = cam.fx * (spec.center[0] + half) / cz + cam.cx;
  const double v0 = cam.fy * (spec.center[1] - half) / cz + cam.cy;
  const double v1 = cam.fy * (spec.center[1] + half) / cz + cam.cy;
  const double w = static_cast<double>(img.width), h = static_cast<double>(img.height);
  if (u1 <= -0.5 || u0 >= w - 0.5 || v1 <= -0.5 || v0 >= h - 0.5) {
    throw CropError("cube projects to [" + std::to_string(u0) + ", " + std::to_string(u1) + "] x [" +
                    std::to_string(v0) + ", " + std::to_string(v1) + "], outside the " +
                    std::to_string(img.width) + "x" + std::to_string(img.height) + " image");
  }

  auto norm_at = [&](std::ptrdiff_t y, std::ptrdiff_t x) -> double {
    if (x < 0 || y < 0 || x >= static_cast<std::ptrdiff_t>(img.width) || y >= static_cast<std::ptrdiff_t>(img.height)) {
      return 1.0;
    }
    const double d = img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    if (d <= 0) return 1.0;
    const double n = 2.0 * (d - cz) / spec.cube_size;
    return (n < -1.0 || n > 1.0) ? 1.0 : n;
  };

  HandSample out;
  out.size = size;
  out.crop = spec;
  out.patch.assign(size * size, 1.0);
  const double du = (u1 - u0) / static_cast<double>(size), dv = (v1 - v0) / static_cast<double>(size);
  for (std::size_t r = 0; r < size; ++r) {
    const double v = v0 + (static_cast<double>(r) + 0.5) * dv;
    const double fy = std::floor(v);
    const double ay = v - fy;
    const auto y0 = static_cast<std::ptrdiff_t>(fy);
    for (std::size_t c = 0; c < size; ++c) {
      const double u = u0 + (static_cast<double>(c) + 0.5) * du;
      const double fx = std::floor(u);
      const double ax = u - fx;
      const auto x0 = static_cast<std::ptrdiff_t>(fx);
      const double a = norm_at(y0, x0), b = norm_at(y0, x0 + 1), cc = norm_at(y0 + 1, x0), d = norm_at(y0 + 1, x0 + 1);
      if (a == 1.0 && b == 1.0 && cc == 1.0 && d == 1.0) continue;
      const double val = (1 - ay) * ((1 - ax) * a + ax * b) + ay * ((1 - ax) * cc + ax * d);
      out.patch[r * size + c] = std::clamp(val, -1.0, 1.0);
    }
  }
  out.joints_norm = normalize_joints(frame.joints, spec);
  out.joints_mm.reserve(3 * frame.joints.size());
  for (const Vec3& j : frame.joints) out.joints_mm.insert(out.joints_mm.end(), j.begin(), j.end());
  return out;
}

std::vector<double> normalize_joints(const std::vector<Vec3>& joints_mm, const CropSpec& crop) {
  std::vector<double> out;
  out.reserve(3 * joints_mm.size());
  const double k = 2.0 / crop.cube_size;
  for (const Vec3& j : joints_mm) {
    for (int a = 0; a < 3; ++a) out.push_back((j[a] - crop.center[a]) * k);
  }
  return out;
}

std::vector<Vec3> denormalize(const std::vector<double>& joints_norm, const CropSpec& crop) {
  if (joints_norm.size() % 3 != 0) {
    throw ValidationError("joint vector length " + std::to_string(joints_norm.size()) + " is not a multiple of 3");
  }
  std::vector<Vec3> out(joints_norm.size() / 3);
  const double k = crop.cube_size / 2.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int a = 0; a < 3; ++a) out[i][a] = joints_norm[3 * i + a] * k + crop.center[a];
  }
  return out;
}

Vec3 mass_centroid(const DepthImage& depth, const Intrinsics& camera, double near_mm, double far_mm) {
  double sx = 0, sy = 0, sz = 0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < depth.height; ++y) {
    for (std::size_t x = 0; x < depth.width; ++x) {
      const double d = depth.at(y, x);
      if (d <= near_mm || d > far_mm || d <= 0) continue;
      sx += (static_cast<double>(x) - camera.cx) * d / camera.fx;
      sy += (static_cast<double>(y) - camera.cy) * d / camera.fy;
      sz += d;
      ++n;
    }
  }
  if (n == 0) throw CropError("no valid depth pixels for the mass centroid");
  const double inv = 1.0 / static_cast<double>(n);
  return {sx * inv, sy * inv, sz * inv};
}

Vec3 reference_center(const RawFrame& frame) {
  if (frame.center) return *frame.center;
  if (frame.joints.empty()) throw CropError("frame has neither a center nor joints");
  Vec3 c{0, 0, 0};
  for (const Vec3& j : frame.joints) {
    for (int a = 0; a < 3; ++a) c[a] += j[a];
  }
  for (double& v : c) v /= static_cast<double>(frame.joints.size());
  return c;
}

HandSample make_sample(const RawFrame& frame, CenterPolicy policy, double cube_size) {
  CropSpec spec;
  spec.cube_size = cube_size;
  spec.center = policy == CenterPolicy::reference ? reference_center(frame) : mass_centroid(frame.depth, frame.camera);
  return crop_normalize(frame, spec);
}

}  // namespace hcrnn
