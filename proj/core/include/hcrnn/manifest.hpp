#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "hcrnn/depth.hpp"
#include "hcrnn/topology.hpp"

namespace hcrnn {

/// One line of a manifest:
///   {"depth": "frames/000001.raw", "joints": [x0, y0, z0, ...],
///    "fx": 475, "fy": 475, "cx": 160, "cy": 120,
///    "center": [x, y, z], "subject": "s0", "depth_scale_um": 1000}
/// `center`, `subject` and `depth_scale_um` (PNG only) are optional. The
/// depth path is relative to the manifest's directory unless absolute.
struct ManifestRecord {
  std::size_t line = 0;
  std::filesystem::path depth;
  std::vector<Vec3> joints;
  Intrinsics camera;
  std::optional<Vec3> center;
  std::string subject;
  std::int32_t depth_scale_um = 1000;
};

/// Parses every record. Throws ParseError (with line number) on malformed
/// lines and ValidationError when a record's joint count differs from
/// `expected_joints` (0 skips the check). Blank lines are ignored.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path, std::size_t expected_joints = 0);

/// Loads the depth file of one record.
RawFrame load_frame(const ManifestRecord& record);

/// All frames of a manifest, in file order.
std::vector<RawFrame> load_manifest(const std::filesystem::path& path, const JointTopology& topology);

nlohmann::json record_to_json(const ManifestRecord& record);

/// Writes frames as raw depth files under dir/depth and a manifest.jsonl
/// plus topology.json in dir. Returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::vector<RawFrame>& frames,
                                    const JointTopology& topology, std::int32_t scale_um = kDefaultDepthScaleUm);

struct Fold {
  std::string held_out;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// One fold per distinct subject (sorted by name); indices into `records`.
std::vector<Fold> leave_one_subject_out(const std::vector<ManifestRecord>& records);

}  // namespace hcrnn
