#include "hcrnn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace hcrnn {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void append_le(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(const char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

json config_to_json(const ModelConfig& c) {
  return json{{"encoder_channels", c.encoder_channels}, {"input_size", c.input_size},
              {"branch_width", c.branch_width},         {"ensemble_width", c.ensemble_width},
              {"palm_hidden_layers", c.palm_hidden_layers}, {"two_branch_width", c.two_branch_width}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.encoder_channels = j.at("encoder_channels").get<std::array<std::size_t, 5>>();
  c.input_size = j.at("input_size").get<std::size_t>();
  c.branch_width = j.at("branch_width").get<std::size_t>();
  c.ensemble_width = j.at("ensemble_width").get<std::size_t>();
  c.palm_hidden_layers = j.at("palm_hidden_layers").get<std::size_t>();
  c.two_branch_width = j.at("two_branch_width").get<std::size_t>();
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct Parsed {
  CheckpointInfo info;
  std::size_t data_start = 0;
};

Parsed parse_header(const std::string& bytes, const std::filesystem::path& path) {
  const std::string where = "checkpoint '" + path.string() + "': ";
  if (bytes.size() < sizeof(kCheckpointMagic) || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw FormatError(where + "bad magic (expected HCRNNCK1)");
  }
  if (bytes.size() < 16) throw FormatError(where + "truncated metadata length");
  const auto meta_len = read_le<std::uint64_t>(bytes.data() + 8);
  if (meta_len > bytes.size() - 16) throw FormatError(where + "metadata length exceeds file size");
  Parsed out;
  out.data_start = 16 + static_cast<std::size_t>(meta_len);
  json& meta = out.info.metadata;
  try {
    meta = json::parse(bytes.begin() + 16, bytes.begin() + static_cast<std::ptrdiff_t>(out.data_start));
  } catch (const json::exception& e) {
    throw FormatError(where + "metadata is not valid JSON: " + e.what());
  }
  auto field = [&](const char* key) -> const json& {
    if (!meta.contains(key)) throw FormatError(where + "metadata field '" + key + "' missing");
    return meta[key];
  };
  try {
    if (field("format_version").get<int>() != kCheckpointVersion) {
      throw FormatError(where + "unsupported format_version " + field("format_version").dump());
    }
    out.info.precision = parse_precision(field("precision").get<std::string>());
    out.info.variant = parse_variant(field("variant").get<std::string>());
    out.info.topology = field("topology").get<JointTopology>();
    out.info.config = config_from_json(field("model_config"));
    field("parameters");
    field("batch_norm");
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(where + "bad metadata: " + e.what());
  }
  return out;
}

}  // namespace

template <typename T>
void save_model(const HcrnnModel<T>& model, const std::filesystem::path& path, const nlohmann::json& extra) {
  ModelConfig config = model.config();
  if (model.variant() == Variant::two_branch) config.two_branch_width = model.finger_width();

  json manifest = json::array();
  std::size_t offset = 0;
  for (const NamedParameter<T>& p : model.parameters()) {
    manifest.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset}});
    offset += p.value.numel() * sizeof(T);
  }
  json moments = json::array();
  for (const NamedBatchNorm<T>& bn : model.batch_norms()) {
    moments.push_back({{"name", bn.name}, {"mean", bn.stats->running_mean}, {"var", bn.stats->running_var}});
  }
  json meta{{"format_version", kCheckpointVersion},
            {"precision", to_string(precision_of<T>())},
            {"variant", to_string(model.variant())},
            {"topology", model.topology()},
            {"model_config", config_to_json(config)},
            {"batch_norm", {{"eps", kBatchNormEps}, {"momentum", kBatchNormMomentum}, {"moments", moments}}},
            {"parameters", manifest},
            {"data_bytes", offset}};
  if (!extra.is_null()) meta["extra"] = extra;

  const std::string doc = meta.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  append_le<std::uint64_t>(out, doc.size());
  out += doc;
  out.reserve(out.size() + offset);
  for (const NamedParameter<T>& p : model.parameters()) {
    for (T v : p.value.data()) append_le<T>(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write checkpoint '" + path.string() + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("short write to checkpoint '" + path.string() + "'");
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  return parse_header(read_file(path), path).info;
}

template <typename T>
HcrnnModel<T> load_model(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Parsed parsed = parse_header(bytes, path);
  const std::string where = "checkpoint '" + path.string() + "': ";
  const CheckpointInfo& info = parsed.info;
  if (info.precision != precision_of<T>()) {
    throw FormatError(where + "precision is " + std::string(to_string(info.precision)) + ", requested " +
                      std::string(to_string(precision_of<T>())));
  }
  HcrnnModel<T> model(info.config, info.topology, info.variant, 0);
  const json& manifest = info.metadata["parameters"];
  auto& params = model.parameters();
  if (!manifest.is_array() || manifest.size() != params.size()) {
    throw FormatError(where + "parameter manifest lists " + std::to_string(manifest.is_array() ? manifest.size() : 0) +
                      " entries, model has " + std::to_string(params.size()));
  }
  const std::size_t data_len = bytes.size() - parsed.data_start;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& entry = manifest[i];
    NamedParameter<T>& p = params[i];
    try {
      if (entry.at("name").get<std::string>() != p.name) {
        throw FormatError(where + "parameter " + std::to_string(i) + " is '" + entry.at("name").get<std::string>() +
                          "', expected '" + p.name + "'");
      }
      if (entry.at("shape").get<Shape>() != p.value.shape()) {
        throw FormatError(where + "parameter '" + p.name + "' has shape " + shape_str(entry.at("shape").get<Shape>()) +
                          ", expected " + shape_str(p.value.shape()));
      }
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t nbytes = p.value.numel() * sizeof(T);
      if (offset > data_len || nbytes > data_len - offset) {
        throw FormatError(where + "truncated data for parameter '" + p.name + "'");
      }
      auto dst = p.value.mutable_data();
      const char* src = bytes.data() + parsed.data_start + offset;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = read_le<T>(src + k * sizeof(T));
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw FormatError(where + "bad manifest entry " + std::to_string(i) + ": " + e.what());
    }
  }
  const json& moments = info.metadata["batch_norm"].value("moments", json::array());
  auto& norms = model.batch_norms();
  if (!moments.is_array() || moments.size() != norms.size()) {
    throw FormatError(where + "batch_norm.moments does not match the model's " + std::to_string(norms.size()) +
                      " batch-norm layers");
  }
  for (std::size_t i = 0; i < norms.size(); ++i) {
    try {
      if (moments[i].at("name").get<std::string>() != norms[i].name) {
        throw FormatError(where + "batch_norm.moments[" + std::to_string(i) + "] is '" +
                          moments[i].at("name").get<std::string>() + "', expected '" + norms[i].name + "'");
      }
      auto mean = moments[i].at("mean").get<std::vector<T>>();
      auto var = moments[i].at("var").get<std::vector<T>>();
      if (mean.size() != norms[i].stats->running_mean.size() || var.size() != mean.size()) {
        throw FormatError(where + "batch_norm moments for '" + norms[i].name + "' have the wrong size");
      }
      norms[i].stats->running_mean = std::move(mean);
      norms[i].stats->running_var = std::move(var);
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw FormatError(where + "bad batch_norm entry " + std::to_string(i) + ": " + e.what());
    }
  }
  return model;
}

template void save_model(const HcrnnModel<float>&, const std::filesystem::path&, const nlohmann::json&);
template void save_model(const HcrnnModel<double>&, const std::filesystem::path&, const nlohmann::json&);
template HcrnnModel<float> load_model<float>(const std::filesystem::path&);
template HcrnnModel<double> load_model<double>(const std::filesystem::path&);

}  // namespace hcrnn
