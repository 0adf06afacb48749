#include "hcrnn/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include "hcrnn/error.hpp"

namespace hcrnn {
namespace {

using nlohmann::json;

double number(const json& rec, const char* key, std::size_t line) {
  if (!rec.contains(key)) throw ParseError(line, std::string("missing field '") + key + "'");
  if (!rec[key].is_number()) throw ParseError(line, std::string("field '") + key + "' is not a number");
  return rec[key].get<double>();
}

Vec3 triple(const json& v, const char* key, std::size_t line) {
  if (!v.is_array() || v.size() != 3) throw ParseError(line, std::string("field '") + key + "' must hold 3 numbers");
  Vec3 out;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ParseError(line, std::string("field '") + key + "' must hold 3 numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

ManifestRecord parse_record(const std::string& text, std::size_t line, const std::filesystem::path& base,
                            std::size_t expected_joints) {
  json rec;
  try {
    rec = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(line, std::string("invalid JSON: ") + e.what());
  }
  if (!rec.is_object()) throw ParseError(line, "record is not an object");
  ManifestRecord r;
  r.line = line;
  if (!rec.contains("depth") || !rec["depth"].is_string()) throw ParseError(line, "missing string field 'depth'");
  r.depth = rec["depth"].get<std::string>();
  if (r.depth.is_relative()) r.depth = base / r.depth;
  if (!rec.contains("joints") || !rec["joints"].is_array()) throw ParseError(line, "missing array field 'joints'");
  const json& js = rec["joints"];
  for (const json& v : js) {
    if (!v.is_number()) throw ParseError(line, "non-numeric joint coordinate");
  }
  if (js.empty() || js.size() % 3 != 0) {
    throw ParseError(line, "joints holds " + std::to_string(js.size()) + " numbers, not a positive multiple of 3");
  }
  for (std::size_t i = 0; i < js.size(); i += 3) {
    r.joints.push_back({js[i].get<double>(), js[i + 1].get<double>(), js[i + 2].get<double>()});
  }
  if (expected_joints != 0 && r.joints.size() != expected_joints) {
    throw ValidationError("manifest line " + std::to_string(line) + ": " + std::to_string(r.joints.size()) +
                          " joints, topology has " + std::to_string(expected_joints));
  }
  r.camera = {number(rec, "fx", line), number(rec, "fy", line), number(rec, "cx", line), number(rec, "cy", line)};
  if (rec.contains("center")) r.center = triple(rec["center"], "center", line);
  if (rec.contains("subject")) {
    if (!rec["subject"].is_string()) throw ParseError(line, "field 'subject' is not a string");
    r.subject = rec["subject"].get<std::string>();
  }
  if (rec.contains("depth_scale_um")) {
    if (!rec["depth_scale_um"].is_number_integer()) throw ParseError(line, "field 'depth_scale_um' is not an integer");
    r.depth_scale_um = rec["depth_scale_um"].get<std::int32_t>();
  }
  return r;
}

}  // namespace

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path, std::size_t expected_joints) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest '" + path.string() + "'");
  const std::filesystem::path base = path.parent_path();
  std::vector<ManifestRecord> out;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_record(text, line, base, expected_joints));
  }
  return out;
}

RawFrame load_frame(const ManifestRecord& record) {
  RawFrame f;
  f.depth = read_depth(record.depth, record.depth_scale_um);
  f.joints = record.joints;
  f.camera = record.camera;
  f.center = record.center;
  f.subject = record.subject;
  return f;
}

std::vector<RawFrame> load_manifest(const std::filesystem::path& path, const JointTopology& topology) {
  std::vector<RawFrame> frames;
  for (const ManifestRecord& r : read_manifest(path, topology.total_joints())) frames.push_back(load_frame(r));
  return frames;
}

json record_to_json(const ManifestRecord& r) {
  json joints = json::array();
  for (const Vec3& j : r.joints) {
    for (double v : j) joints.push_back(v);
  }
  json out{{"depth", r.depth.generic_string()}, {"joints", joints}, {"fx", r.camera.fx},
           {"fy", r.camera.fy},                 {"cx", r.camera.cx}, {"cy", r.camera.cy}};
  if (r.center) out["center"] = *r.center;
  if (!r.subject.empty()) out["subject"] = r.subject;
  return out;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::vector<RawFrame>& frames,
                                    const JointTopology& topology, std::int32_t scale_um) {
  std::filesystem::create_directories(dir / "depth");
  const std::filesystem::path manifest = dir / "manifest.jsonl";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest '" + manifest.string() + "'");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.raw", i);
    const std::filesystem::path rel = std::filesystem::path("depth") / name;
    write_depth_raw(dir / rel, frames[i].depth, scale_um);
    ManifestRecord r;
    r.depth = rel;
    r.joints = frames[i].joints;
    r.camera = frames[i].camera;
    r.center = frames[i].center;
    r.subject = frames[i].subject;
    out << record_to_json(r).dump() << '\n';
  }
  std::ofstream topo(dir / "topology.json", std::ios::trunc);
  topo << json(topology).dump(2) << '\n';
  if (!out || !topo) throw FormatError("short write in dataset directory '" + dir.string() + "'");
  return manifest;
}

std::vector<Fold> leave_one_subject_out(const std::vector<ManifestRecord>& records) {
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < records.size(); ++i) by_subject[records[i].subject].push_back(i);
  std::vector<Fold> folds;
  for (const auto& [subject, indices] : by_subject) {
    Fold f;
    f.held_out = subject;
    f.test = indices;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].subject != subject) f.train.push_back(i);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

}  // namespace hcrnn
