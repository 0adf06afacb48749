#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "hcrnn/model.hpp"
#include "hcrnn/precision.hpp"

namespace hcrnn {

/// Checkpoint layout (all integers little-endian):
///
///   8 bytes   magic "HCRNNCK1"
///   8 bytes   u64 length L of the metadata document
///   L bytes   UTF-8 JSON metadata: format version, precision, variant,
///             topology, model config, batch-norm constants and running
///             moments, and the parameter manifest (name, shape, byte offset)
///   ...       raw little-endian parameter arrays in manifest order
inline constexpr char kCheckpointMagic[8] = {'H', 'C', 'R', 'N', 'N', 'C', 'K', '1'};
inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  Precision precision;
  Variant variant;
  JointTopology topology;
  ModelConfig config;
  nlohmann::json metadata;
};

/// `extra` is stored verbatim under metadata["extra"].
template <typename T>
void save_model(const HcrnnModel<T>& model, const std::filesystem::path& path, const nlohmann::json& extra = {});

/// Throws FormatError naming the offending field, or if the stored
/// precision differs from T.
template <typename T>
HcrnnModel<T> load_model(const std::filesystem::path& path);

/// Header and metadata only.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

}  // namespace hcrnn
