#pragma once

#include <array>
#include <cstddef>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace hcrnn {

inline constexpr std::size_t kFingerCount = 5;
inline constexpr std::array<std::string_view, kFingerCount> kFingerNames = {"thumb", "index", "middle", "ring",
                                                                            "little"};

struct FingerChain {
  std::string name;
  std::vector<std::string> joints;  // root (MCP) first, tip last

  std::size_t length() const { return joints.size(); }
  bool operator==(const FingerChain&) const = default;
};

/// Palm joints plus five finger chains. Global joint order is the palm
/// joints followed by each finger's chain, thumb to little.
struct JointTopology {
  std::string name;
  std::vector<std::string> palm_joints;
  std::array<FingerChain, kFingerCount> fingers;

  std::size_t palm_count() const { return palm_joints.size(); }
  std::size_t total_joints() const;
  std::size_t max_chain_length() const;
  /// Index of finger k's first joint in global order.
  std::size_t finger_offset(std::size_t finger) const;
  std::vector<std::string> joint_names() const;

  /// Throws ConfigError on an empty palm, an empty chain, or duplicate names.
  void validate() const;

  /// "msra" (P=1, 4 per finger), "icvl" (P=1, 3 per finger), "nyu" (P=4, 2 per finger).
  static JointTopology preset(std::string_view name);

  bool operator==(const JointTopology&) const = default;
};

void to_json(nlohmann::json& j, const JointTopology& topo);
void from_json(const nlohmann::json& j, JointTopology& topo);

}  // namespace hcrnn
