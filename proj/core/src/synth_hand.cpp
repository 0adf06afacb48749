#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hcrnn/error.hpp"
#include "hcrnn/synth.hpp"

namespace hcrnn {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

using Mat3 = std::array<Vec3, 3>;  // rows

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 mul(const Mat3& m, const Vec3& v) { return {dot(m[0], v), dot(m[1], v), dot(m[2], v)}; }
Vec3 mul_t(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2], m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
          m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2]};
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
    }
  }
  return out;
}

Mat3 rotation(const Vec3& deg) {
  const double x = deg[0] * kDeg, y = deg[1] * kDeg, z = deg[2] * kDeg;
  const Mat3 rx{{{1, 0, 0}, {0, std::cos(x), -std::sin(x)}, {0, std::sin(x), std::cos(x)}}};
  const Mat3 ry{{{std::cos(y), 0, std::sin(y)}, {0, 1, 0}, {-std::sin(y), 0, std::cos(y)}}};
  const Mat3 rz{{{std::cos(z), -std::sin(z), 0}, {std::sin(z), std::cos(z), 0}, {0, 0, 1}}};
  return matmul(rz, matmul(ry, rx));
}

const char* const kPartNames[4] = {"mcp", "pip", "dip", "tip"};

// Hand-frame joint positions of one finger, mcp to tip.
std::array<Vec3, 4> finger_chain(const HandModel::Finger& f, const FingerPose& p) {
  const double phi = (f.direction_deg + p.abduction) * kDeg;
  const Vec3 d{std::sin(phi), -std::cos(phi), 0};
  const Vec3 toward_palm{0, 0, -1};
  std::array<Vec3, 4> pts;
  pts[0] = f.mcp;
  double bend = 0;
  for (int i = 0; i < 3; ++i) {
    bend += p.flexion[i] * kDeg;
    const Vec3 dir = std::cos(bend) * d + std::sin(bend) * toward_palm;
    pts[i + 1] = pts[i] + f.lengths[i] * dir;
  }
  return pts;
}

struct Capsule {
  Vec3 a, b;
  double r;
};

struct Ellipsoid {
  Vec3 center;
  Mat3 rot;  // hand frame -> camera
  Vec3 radii;
};

// Distance along unit ray rd from the origin, or -1.
double hit_capsule(const Vec3& rd, const Capsule& c) {
  const Vec3 ro{0, 0, 0};
  const Vec3 ba = c.b - c.a, oa = ro - c.a;
  const double baba = dot(ba, ba), bard = dot(ba, rd), baoa = dot(ba, oa), rdoa = dot(rd, oa), oaoa = dot(oa, oa);
  const double qa = baba - bard * bard;
  double qb = baba * rdoa - baoa * bard;
  double qc = baba * oaoa - baoa * baoa - c.r * c.r * baba;
  double h = qb * qb - qa * qc;
  if (h < 0) return -1;
  double y = baoa;
  if (qa > 1e-12) {
    const double t = (-qb - std::sqrt(h)) / qa;
    y = baoa + t * bard;
    if (y > 0 && y < baba) return t;
  }
  const Vec3 oc = y <= 0 ? oa : ro - c.b;
  qb = dot(rd, oc);
  qc = dot(oc, oc) - c.r * c.r;
  h = qb * qb - qc;
  if (h > 0) return -qb - std::sqrt(h);
  return -1;
}

double hit_ellipsoid(const Vec3& rd, const Ellipsoid& e) {
  const Vec3 o = mul_t(e.rot, Vec3{0, 0, 0} - e.center);
  const Vec3 d = mul_t(e.rot, rd);
  const Vec3 ol{o[0] / e.radii[0], o[1] / e.radii[1], o[2] / e.radii[2]};
  const Vec3 dl{d[0] / e.radii[0], d[1] / e.radii[1], d[2] / e.radii[2]};
  const double a = dot(dl, dl), b = dot(ol, dl), c = dot(ol, ol) - 1;
  const double h = b * b - a * c;
  if (h < 0) return -1;
  return (-b - std::sqrt(h)) / a;
}

struct PixelBox {
  std::size_t x0, x1, y0, y1;  // half-open
};

// Conservative screen box of a sphere.
PixelBox project_bound(const Vec3& center, double radius, const SynthOptions& opt) {
  PixelBox full{0, opt.width, 0, opt.height};
  if (center[2] - radius <= 1.0) return full;
  double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
  for (int i = 0; i < 8; ++i) {
    const double x = center[0] + ((i & 1) ? radius : -radius);
    const double y = center[1] + ((i & 2) ? radius : -radius);
    const double z = center[2] + ((i & 4) ? radius : -radius);
    const double u = opt.camera.fx * x / z + opt.camera.cx, v = opt.camera.fy * y / z + opt.camera.cy;
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  auto clampi = [](double v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(hi)));
  };
  return {clampi(std::floor(umin), opt.width), clampi(std::ceil(umax) + 1, opt.width), clampi(std::floor(vmin), opt.height),
          clampi(std::ceil(vmax) + 1, opt.height)};
}

}  // namespace

HandModel HandModel::standard() {
  HandModel m;
  m.fingers[0] = {{-30, -22, 0}, -50, {34, 30, 24}, {10, 9, 8, 7}};
  m.fingers[1] = {{-25, -88, 0}, -6, {40, 25, 20}, {9, 8, 7, 6.5}};
  m.fingers[2] = {{-7, -93, 0}, 0, {45, 28, 21}, {9, 8, 7, 6.5}};
  m.fingers[3] = {{11, -89, 0}, 6, {42, 26, 20}, {8.5, 7.5, 6.5, 6}};
  m.fingers[4] = {{27, -80, 0}, 14, {32, 20, 18}, {8, 7, 6, 5.5}};
  return m;
}

void validate_pose(const HandPose& pose) {
  for (std::size_t k = 0; k < kFingerCount; ++k) {
    const FingerPose& f = pose.fingers[k];
    const std::string who = std::string(kFingerNames[k]);
    if (!(std::abs(f.abduction) <= kMaxAbductionDeg)) {
      throw ValidationError(who + " abduction " + std::to_string(f.abduction) + " deg outside [-20, 20]");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (!(f.flexion[i] >= 0 && f.flexion[i] <= kMaxFlexionDeg)) {
        throw ValidationError(who + " " + kPartNames[i] + " flexion " + std::to_string(f.flexion[i]) +
                              " deg outside [0, 90]");
      }
    }
  }
  for (double v : pose.rotation_deg) {
    if (!std::isfinite(v)) throw ValidationError("non-finite global rotation");
  }
  for (double v : pose.translation_mm) {
    if (!std::isfinite(v)) throw ValidationError("non-finite global translation");
  }
}

std::map<std::string, Vec3> hand_points(const HandPose& pose, const HandModel& model) {
  validate_pose(pose);
  const Mat3 r = rotation(pose.rotation_deg);
  auto place = [&](const Vec3& p) { return mul(r, p) + pose.translation_mm; };
  std::map<std::string, Vec3> out;
  out["wrist"] = place(model.wrist);
  out["wrist_radial"] = place(model.wrist_radial);
  out["wrist_ulnar"] = place(model.wrist_ulnar);
  out["palm_center"] = place(model.palm_center);
  for (std::size_t k = 0; k < kFingerCount; ++k) {
    const auto chain = finger_chain(model.fingers[k], pose.fingers[k]);
    for (int i = 0; i < 4; ++i) out[std::string(kFingerNames[k]) + "_" + kPartNames[i]] = place(chain[i]);
  }
  return out;
}

HandPose random_pose(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  HandPose p;
  for (FingerPose& f : p.fingers) {
    f.abduction = between(-kMaxAbductionDeg, kMaxAbductionDeg);
    for (double& a : f.flexion) a = between(0, kMaxFlexionDeg);
  }
  p.rotation_deg = {between(-30, 30), between(-30, 30), between(-60, 60)};
  p.translation_mm = {between(-30, 30), between(-30, 30), between(350, 450)};
  return p;
}

RawFrame synth_hand(const HandPose& pose, const JointTopology& topology, std::uint64_t seed,
                    const SynthOptions& options) {
  const HandModel model = HandModel::standard();
  const auto points = hand_points(pose, model);
  RawFrame frame;
  frame.camera = options.camera;
  for (const std::string& name : topology.joint_names()) {
    auto it = points.find(name);
    if (it == points.end()) throw ValidationError("synthetic hand has no joint named '" + name + "'");
    frame.joints.push_back(it->second);
  }
  frame.center = points.at("palm_center");

  std::vector<Capsule> capsules;
  capsules.push_back({points.at("wrist_radial"), points.at("wrist_ulnar"), model.wrist_radius * 0.6});
  for (std::size_t k = 0; k < kFingerCount; ++k) {
    const std::string base = std::string(kFingerNames[k]) + "_";
    for (int i = 0; i < 3; ++i) {
      capsules.push_back({points.at(base + kPartNames[i]), points.at(base + kPartNames[i + 1]),
                          model.fingers[k].radii[static_cast<std::size_t>(i)]});
    }
  }
  const Ellipsoid palm{points.at("palm_center"), rotation(pose.rotation_deg), model.palm_radii};

  const std::size_t w = options.width, h = options.height;
  std::vector<double> nearest(w * h, std::numeric_limits<double>::infinity());
  auto trace = [&](const PixelBox& box, auto&& hit) {
    for (std::size_t y = box.y0; y < box.y1; ++y) {
      for (std::size_t x = box.x0; x < box.x1; ++x) {
        const Vec3 ray{(static_cast<double>(x) - options.camera.cx) / options.camera.fx,
                       (static_cast<double>(y) - options.camera.cy) / options.camera.fy, 1.0};
        const double len = std::sqrt(dot(ray, ray));
        const Vec3 rd = (1.0 / len) * ray;
        const double t = hit(rd);
        if (t > 0) {
          const double z = t * rd[2];
          double& best = nearest[y * w + x];
          best = std::min(best, z);
        }
      }
    }
  };
  for (const Capsule& c : capsules) {
    const Vec3 mid = 0.5 * (c.a + c.b);
    const double radius = 0.5 * std::sqrt(dot(c.b - c.a, c.b - c.a)) + c.r;
    trace(project_bound(mid, radius, options), [&](const Vec3& rd) { return hit_capsule(rd, c); });
  }
  const double palm_bound = std::max({model.palm_radii[0], model.palm_radii[1], model.palm_radii[2]});
  trace(project_bound(palm.center, palm_bound, options), [&](const Vec3& rd) { return hit_ellipsoid(rd, palm); });

  frame.depth = DepthImage(h, w);
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, options.noise_mm > 0 ? options.noise_mm : 1.0);
  for (std::size_t i = 0; i < w * h; ++i) {
    if (!std::isfinite(nearest[i])) continue;
    double z = nearest[i];
    if (options.noise_mm > 0) z = std::max(z + noise(rng), 1.0);
    frame.depth.mm[i] = quantize_depth(static_cast<float>(z), options.depth_scale_um);
  }
  return frame;
}

}  // namespace hcrnn
