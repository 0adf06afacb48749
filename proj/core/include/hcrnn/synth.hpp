#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include "hcrnn/depth.hpp"
#include "hcrnn/rng.hpp"
#include "hcrnn/topology.hpp"

namespace hcrnn {

/// Angles in degrees. Flexion bends toward the palm side (the camera, for
/// an unrotated hand); abduction turns the whole chain within the palm plane.
struct FingerPose {
  double abduction = 0;
  std::array<double, 3> flexion{0, 0, 0};  // MCP, PIP, DIP
};

struct HandPose {
  std::array<FingerPose, kFingerCount> fingers{};
  Vec3 rotation_deg{0, 0, 0};  // applied as Rz * Ry * Rx
  Vec3 translation_mm{0, 0, 400};
};

inline constexpr double kMaxFlexionDeg = 90;
inline constexpr double kMaxAbductionDeg = 20;

/// Fixed hand geometry in the hand frame: x toward the little finger,
/// y from the fingertips toward the wrist, z away from the palm side.
struct HandModel {
  struct Finger {
    Vec3 mcp;                       // base joint, hand frame
    double direction_deg;           // rest direction in the palm plane, 0 = -y
    std::array<double, 3> lengths;  // proximal, middle, distal phalanx
    std::array<double, 4> radii;    // capsule radius at mcp, pip, dip, tip
  };
  std::array<Finger, kFingerCount> fingers;
  Vec3 wrist{0, 0, 0};
  Vec3 wrist_radial{-28, 0, 0};
  Vec3 wrist_ulnar{28, 0, 0};
  Vec3 palm_center{0, -45, 0};
  Vec3 palm_radii{42, 48, 13};  // ellipsoid semi-axes around palm_center
  double wrist_radius = 24;

  static HandModel standard();
};

/// Every named point: wrist, wrist_radial, wrist_ulnar, palm_center and
/// {finger}_{mcp,pip,dip,tip}, in camera space (mm).
std::map<std::string, Vec3> hand_points(const HandPose& pose, const HandModel& model = HandModel::standard());

/// Throws ValidationError outside flexion [0, 90] or abduction [-20, 20].
void validate_pose(const HandPose& pose);

/// Uniform inside the anatomical bounds; global rotation and translation
/// vary around a frontal hand at 350-450 mm.
HandPose random_pose(Rng& rng);

struct SynthOptions {
  std::size_t width = 320, height = 240;
  Intrinsics camera{475, 475, 160, 120};
  double noise_mm = 0;  // Gaussian depth noise on hit pixels
  std::int32_t depth_scale_um = kDefaultDepthScaleUm;
};

/// Ray-cast depth of capsules along the bones plus an ellipsoid palm. Joints
/// follow the topology's names; RawFrame::center is the palm center.
/// `seed` drives the noise only. Throws ValidationError for unknown joint
/// names or out-of-bounds angles.
RawFrame synth_hand(const HandPose& pose, const JointTopology& topology, std::uint64_t seed,
                    const SynthOptions& options = {});

}  // namespace hcrnn
