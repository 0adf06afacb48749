#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hcrnn/rng.hpp"

namespace hcrnn {

using Vec3 = std::array<double, 3>;

struct Intrinsics {
  double fx = 475, fy = 475, cx = 160, cy = 120;
  bool operator==(const Intrinsics&) const = default;
};

/// Row-major depth in millimeters; 0 marks a missing measurement.
struct DepthImage {
  std::size_t height = 0, width = 0;
  std::vector<float> mm;

  DepthImage() = default;
  DepthImage(std::size_t h, std::size_t w) : height(h), width(w), mm(h * w, 0.0f) {}
  float at(std::size_t y, std::size_t x) const { return mm[y * width + x]; }
  float& at(std::size_t y, std::size_t x) { return mm[y * width + x]; }
};

struct RawFrame {
  DepthImage depth;
  std::vector<Vec3> joints;  // camera space, mm, global joint order
  Intrinsics camera;
  /// Cube center supplied with the frame, if any.
  std::optional<Vec3> center;
  std::string subject;
};

// ---------------------------------------------------------------------------
// Depth files

/// Default unit of stored depth values: 100 um.
inline constexpr std::int32_t kDefaultDepthScaleUm = 100;

/// mm -> stored integer units. Throws ValidationError outside the u16 range.
std::uint16_t encode_depth(float mm, std::int32_t scale_um);
float decode_depth(std::uint16_t units, std::int32_t scale_um);
/// encode then decode: the value a written file hands back.
float quantize_depth(float mm, std::int32_t scale_um);

/// Raw grid: int32 LE height, width, scale (um per unit), then u16 LE values.
void write_depth_raw(const std::filesystem::path& path, const DepthImage& depth,
                     std::int32_t scale_um = kDefaultDepthScaleUm);
/// 16-bit grayscale PNG holding values in `scale_um` units.
void write_depth_png(const std::filesystem::path& path, const DepthImage& depth, std::int32_t scale_um = 1000);

/// Reads either format, detected from the PNG signature. `png_scale_um`
/// applies to PNG files only; raw files carry their own scale. Throws
/// FormatError on unreadable or truncated files.
DepthImage read_depth(const std::filesystem::path& path, std::int32_t png_scale_um = 1000);

// ---------------------------------------------------------------------------
// Crop and normalization

inline constexpr std::size_t kPatchSize = 96;

struct CropSpec {
  Vec3 center{0, 0, 0};
  double cube_size = 300;  // mm, edge length
};

/// Network-ready sample. Patch and joints live in the cube frame [-1, 1].
struct HandSample {
  std::size_t size = kPatchSize;
  std::vector<double> patch;        // size x size, row-major
  std::vector<double> joints_norm;  // 3T
  std::vector<double> joints_mm;    // 3T ground truth, camera space
  CropSpec crop;
};

/// Projects the cube at depth center_z, resamples bilinearly and maps depth
/// d to clamp(2 (d - cz) / cube, -1, 1). Missing pixels, pixels outside the
/// cube's depth range and pixels outside the image become exactly 1.
/// Throws CropError if the cube does not overlap the image.
HandSample crop_normalize(const RawFrame& frame, const CropSpec& spec, std::size_t size = kPatchSize);

std::vector<double> normalize_joints(const std::vector<Vec3>& joints_mm, const CropSpec& crop);
std::vector<Vec3> denormalize(const std::vector<double>& joints_norm, const CropSpec& crop);

/// Back-projected centroid of valid pixels with depth in (near, far].
/// Throws CropError if no pixel qualifies.
Vec3 mass_centroid(const DepthImage& depth, const Intrinsics& camera, double near_mm = 0,
                   double far_mm = 1e9);

/// Center used for a frame: the supplied center, else the joint centroid.
Vec3 reference_center(const RawFrame& frame);

enum class CenterPolicy { reference, mass_centroid };

HandSample make_sample(const RawFrame& frame, CenterPolicy policy = CenterPolicy::reference,
                       double cube_size = 300);

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentParams {
  double rotation_deg = 0;
  double tx = 0, ty = 0;  // pixels
  double scale = 1;
};

/// Rotation U[-180, 180] deg, translation U[-10, 10] px per axis, scale U[0.9, 1.1].
AugmentParams draw_augment(Rng& rng);

/// One composite warp about the patch center. Content is scaled by 1/scale
/// (the cube grows by `scale`), rotated, then shifted; joints follow with
/// z divided by scale. Resampling is bilinear with background 1.
HandSample apply_augment(const HandSample& sample, const AugmentParams& params);
HandSample augment(const HandSample& sample, std::uint64_t seed);

/// Patch pixel coordinate of a normalized axis value: (v + 1) * size / 2 - 0.5.
inline double norm_to_pixel(double v, std::size_t size = kPatchSize) {
  return (v + 1.0) * static_cast<double>(size) / 2.0 - 0.5;
}

}  // namespace hcrnn
