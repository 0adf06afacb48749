#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "hcrnn/error.hpp"
#include "hcrnn/synth.hpp"

namespace {

using hcrnn::HandModel;
using hcrnn::HandPose;
using hcrnn::Vec3;

// 4x4 homogeneous transforms, row-major.
using M4 = std::array<std::array<double, 4>, 4>;

M4 identity() {
  M4 m{};
  for (int i = 0; i < 4; ++i) m[i][i] = 1;
  return m;
}

M4 operator*(const M4& a, const M4& b) {
  M4 c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

M4 translate(double x, double y, double z) {
  M4 m = identity();
  m[0][3] = x;
  m[1][3] = y;
  m[2][3] = z;
  return m;
}

M4 rot(int axis, double deg) {
  const double a = deg * std::numbers::pi / 180, c = std::cos(a), s = std::sin(a);
  M4 m = identity();
  const int i = (axis + 1) % 3, j = (axis + 2) % 3;
  m[i][i] = c;
  m[i][j] = -s;
  m[j][i] = s;
  m[j][j] = c;
  return m;
}

Vec3 origin_of(const M4& m) { return {m[0][3], m[1][3], m[2][3]}; }

// Link frames: each phalanx extends along its local -y; flexion turns about
// the local x axis toward -z.
std::array<Vec3, 4> fk_chain(const HandPose& pose, const HandModel& model, std::size_t k) {
  const auto& f = model.fingers[k];
  const auto& p = pose.fingers[k];
  const M4 global = translate(pose.translation_mm[0], pose.translation_mm[1], pose.translation_mm[2]) *
                    rot(2, pose.rotation_deg[2]) * rot(1, pose.rotation_deg[1]) * rot(0, pose.rotation_deg[0]);
  M4 t = global * translate(f.mcp[0], f.mcp[1], f.mcp[2]) * rot(2, f.direction_deg + p.abduction);
  std::array<Vec3, 4> out;
  out[0] = origin_of(t);
  for (int i = 0; i < 3; ++i) {
    t = t * rot(0, p.flexion[i]) * translate(0, -f.lengths[i], 0);
    out[i + 1] = origin_of(t);
  }
  return out;
}

HandPose some_pose(std::uint64_t seed) {
  hcrnn::Rng rng(seed);
  return hcrnn::random_pose(rng);
}

TEST(HandPoints, MatchesLinkTransformProduct) {
  const HandModel model = HandModel::standard();
  const char* parts[] = {"mcp", "pip", "dip", "tip"};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const HandPose pose = some_pose(seed);
    const auto pts = hcrnn::hand_points(pose, model);
    for (std::size_t k = 0; k < 5; ++k) {
      const auto ref = fk_chain(pose, model, k);
      for (int i = 0; i < 4; ++i) {
        const Vec3& got = pts.at(std::string(hcrnn::kFingerNames[k]) + "_" + parts[i]);
        for (int a = 0; a < 3; ++a) EXPECT_NEAR(got[a], ref[i][a], 1e-9) << seed << " " << k << " " << i;
      }
    }
  }
}

TEST(HandPoints, FlatHandIsCoplanar) {
  HandPose pose;
  pose.rotation_deg = {20, -35, 50};
  pose.translation_mm = {10, -5, 420};
  const auto pts = hcrnn::hand_points(pose);
  // plane normal is the rotated hand z axis
  const M4 r = rot(2, 50) * rot(1, -35) * rot(0, 20);
  const Vec3 n{r[0][2], r[1][2], r[2][2]};
  for (const auto& [name, p] : pts) {
    double d = 0;
    for (int a = 0; a < 3; ++a) d += (p[a] - pose.translation_mm[a]) * n[a];
    EXPECT_LT(std::abs(d), 1.0) << name;
  }
}

TEST(HandPoints, BoundsAreValidated) {
  HandPose pose;
  pose.fingers[2].flexion[1] = 90;
  pose.fingers[0].abduction = -20;
  EXPECT_NO_THROW(hcrnn::validate_pose(pose));
  pose.fingers[2].flexion[1] = 90.5;
  EXPECT_THROW(hcrnn::hand_points(pose), hcrnn::ValidationError);
  pose.fingers[2].flexion[1] = -1;
  EXPECT_THROW(hcrnn::validate_pose(pose), hcrnn::ValidationError);
  pose.fingers[2].flexion[1] = 0;
  pose.fingers[4].abduction = 21;
  EXPECT_THROW(hcrnn::synth_hand(pose, hcrnn::JointTopology::preset("msra"), 0), hcrnn::ValidationError);
}

TEST(HandPoints, RandomPosesStayInBounds) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) EXPECT_NO_THROW(hcrnn::validate_pose(some_pose(seed)));
}

TEST(SynthHand, JointsFollowTopology) {
  for (const char* preset : {"msra", "icvl", "nyu"}) {
    const auto topo = hcrnn::JointTopology::preset(preset);
    const HandPose pose = some_pose(3);
    const auto frame = hcrnn::synth_hand(pose, topo, 0);
    const auto pts = hcrnn::hand_points(pose);
    const auto names = topo.joint_names();
    ASSERT_EQ(frame.joints.size(), names.size());
    for (std::size_t i = 0; i < names.size(); ++i) EXPECT_EQ(frame.joints[i], pts.at(names[i]));
    EXPECT_EQ(*frame.center, pts.at("palm_center"));
  }
  auto bad = hcrnn::JointTopology::preset("msra");
  bad.fingers[1].joints[0] = "index_knuckle";
  EXPECT_THROW(hcrnn::synth_hand(HandPose{}, bad, 0), hcrnn::ValidationError);
}

TEST(SynthHand, DeterministicPerPoseAndSeed) {
  const auto topo = hcrnn::JointTopology::preset("msra");
  hcrnn::SynthOptions noisy;
  noisy.noise_mm = 2.0;
  const HandPose pose = some_pose(4);
  const auto a = hcrnn::synth_hand(pose, topo, 11, noisy);
  const auto b = hcrnn::synth_hand(pose, topo, 11, noisy);
  const auto c = hcrnn::synth_hand(pose, topo, 12, noisy);
  EXPECT_EQ(a.depth.mm, b.depth.mm);
  EXPECT_NE(a.depth.mm, c.depth.mm);
  EXPECT_EQ(a.joints, c.joints);
}

TEST(SynthHand, JointsIndependentOfResolution) {
  const auto topo = hcrnn::JointTopology::preset("icvl");
  const HandPose pose = some_pose(5);
  hcrnn::SynthOptions big;
  big.width = 640;
  big.height = 480;
  big.camera = {950, 950, 320, 240};
  const auto lo = hcrnn::synth_hand(pose, topo, 0);
  const auto hi = hcrnn::synth_hand(pose, topo, 0, big);
  EXPECT_EQ(lo.joints, hi.joints);
  EXPECT_EQ(hi.depth.width, 640u);
}

TEST(SynthHand, RendersHandNearItsJoints) {
  const auto topo = hcrnn::JointTopology::preset("msra");
  HandPose pose;  // open, frontal hand at 400 mm
  const auto f = hcrnn::synth_hand(pose, topo, 0);
  std::size_t hits = 0;
  for (float v : f.depth.mm) {
    if (v > 0) {
      ++hits;
      EXPECT_GT(v, 400 - 15);
      EXPECT_LT(v, 400 + 15);
    }
  }
  EXPECT_GT(hits, 1000u);
  // the palm center pixel sees the palm surface, 13 mm in front
  const Vec3 pc = *f.center;
  const auto u = static_cast<std::size_t>(std::lround(475 * pc[0] / pc[2] + 160));
  const auto v = static_cast<std::size_t>(std::lround(475 * pc[1] / pc[2] + 120));
  EXPECT_NEAR(f.depth.at(v, u), 400 - 13, 1.0);
}

TEST(SynthHand, CurledFingerHidesItsTip) {
  const auto topo = hcrnn::JointTopology::preset("msra");
  for (std::size_t k = 1; k < 5; ++k) {
    HandPose pose;
    pose.fingers[k].flexion = {90, 90, 90};
    const auto f = hcrnn::synth_hand(pose, topo, 0);
    const Vec3 tip = f.joints[topo.finger_offset(k) + 3];
    const auto u = static_cast<std::size_t>(std::lround(475 * tip[0] / tip[2] + 160));
    const auto v = static_cast<std::size_t>(std::lround(475 * tip[1] / tip[2] + 120));
    const double seen = f.depth.at(v, u);
    ASSERT_GT(seen, 0.0);
    // A surface clearly in front of the tip's own capsule occludes it.
    const double tip_surface = tip[2] - hcrnn::HandModel::standard().fingers[k].radii[3];
    EXPECT_LT(seen, tip_surface - 3.0) << hcrnn::kFingerNames[k];
  }
}

}  // namespace
