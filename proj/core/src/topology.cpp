#include "hcrnn/topology.hpp"

#include <algorithm>
#include <set>

#include "hcrnn/error.hpp"

namespace hcrnn {

std::size_t JointTopology::total_joints() const {
  std::size_t n = palm_joints.size();
  for (const FingerChain& f : fingers) n += f.length();
  return n;
}

std::size_t JointTopology::max_chain_length() const {
  std::size_t m = 0;
  for (const FingerChain& f : fingers) m = std::max(m, f.length());
  return m;
}

std::size_t JointTopology::finger_offset(std::size_t finger) const {
  if (finger >= kFingerCount) throw ConfigError("finger index " + std::to_string(finger) + " out of range");
  std::size_t off = palm_joints.size();
  for (std::size_t k = 0; k < finger; ++k) off += fingers[k].length();
  return off;
}

std::vector<std::string> JointTopology::joint_names() const {
  std::vector<std::string> names = palm_joints;
  for (const FingerChain& f : fingers) names.insert(names.end(), f.joints.begin(), f.joints.end());
  return names;
}

void JointTopology::validate() const {
  if (palm_joints.empty()) throw ConfigError("topology '" + name + "': palm needs at least one joint");
  for (const FingerChain& f : fingers) {
    if (f.joints.empty()) throw ConfigError("topology '" + name + "': finger '" + f.name + "' has no joints");
  }
  std::set<std::string> seen;
  for (const std::string& j : joint_names()) {
    if (!seen.insert(j).second) throw ConfigError("topology '" + name + "': duplicate joint '" + j + "'");
  }
}

JointTopology JointTopology::preset(std::string_view name) {
  JointTopology topo;
  topo.name = std::string(name);
  std::vector<std::string_view> parts;
  if (name == "msra") {
    topo.palm_joints = {"wrist"};
    parts = {"mcp", "pip", "dip", "tip"};
  } else if (name == "icvl") {
    topo.palm_joints = {"palm_center"};
    parts = {"mcp", "pip", "tip"};
  } else if (name == "nyu") {
    // Placeholder split of the 14-joint subset; override with a custom descriptor.
    topo.palm_joints = {"wrist", "wrist_radial", "wrist_ulnar", "palm_center"};
    parts = {"mcp", "tip"};
  } else {
    throw ConfigError("unknown topology preset '" + std::string(name) + "' (expected msra, icvl or nyu)");
  }
  for (std::size_t k = 0; k < kFingerCount; ++k) {
    topo.fingers[k].name = std::string(kFingerNames[k]);
    for (std::string_view p : parts) topo.fingers[k].joints.push_back(topo.fingers[k].name + "_" + std::string(p));
  }
  return topo;
}

void to_json(nlohmann::json& j, const JointTopology& topo) {
  nlohmann::json fingers = nlohmann::json::array();
  for (const FingerChain& f : topo.fingers) fingers.push_back({{"name", f.name}, {"joints", f.joints}});
  j = nlohmann::json{{"name", topo.name}, {"palm", topo.palm_joints}, {"fingers", fingers}};
}

void from_json(const nlohmann::json& j, JointTopology& topo) {
  try {
    topo.name = j.at("name").get<std::string>();
    topo.palm_joints = j.at("palm").get<std::vector<std::string>>();
    const auto& fingers = j.at("fingers");
    if (!fingers.is_array() || fingers.size() != kFingerCount) {
      throw ConfigError("topology descriptor needs exactly 5 fingers");
    }
    for (std::size_t k = 0; k < kFingerCount; ++k) {
      topo.fingers[k].name = fingers[k].at("name").get<std::string>();
      topo.fingers[k].joints = fingers[k].at("joints").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad topology descriptor: ") + e.what());
  }
  topo.validate();
}

}  // namespace hcrnn
