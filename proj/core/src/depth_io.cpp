#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "hcrnn/depth.hpp"
#include "hcrnn/error.hpp"

namespace hcrnn {
namespace {

void put_i32(std::string& out, std::int32_t v) {
  const auto u = static_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
}

std::int32_t get_i32(const unsigned char* p) {
  std::uint32_t u = 0;
  for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return static_cast<std::int32_t>(u);
}

void check_scale(std::int32_t scale_um) {
  if (scale_um <= 0) throw ValidationError("depth scale must be positive, got " + std::to_string(scale_um));
}

DepthImage read_raw(const std::string& bytes, const std::filesystem::path& path) {
  const std::string where = "depth file '" + path.string() + "': ";
  if (bytes.size() < 12) throw FormatError(where + "truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::int32_t h = get_i32(p), w = get_i32(p + 4), scale = get_i32(p + 8);
  if (h <= 0 || w <= 0) throw FormatError(where + "bad extent " + std::to_string(h) + "x" + std::to_string(w));
  if (scale <= 0) throw FormatError(where + "bad scale " + std::to_string(scale));
  const std::size_t n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  if (bytes.size() != 12 + 2 * n) {
    throw FormatError(where + "expected " + std::to_string(12 + 2 * n) + " bytes, found " +
                      std::to_string(bytes.size()));
  }
  DepthImage img(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  for (std::size_t i = 0; i < n; ++i) {
    const auto units = static_cast<std::uint16_t>(p[12 + 2 * i] | (p[13 + 2 * i] << 8));
    img.mm[i] = decode_depth(units, scale);
  }
  return img;
}

struct PngRead {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngRead() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct PngWrite {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWrite() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

struct Cursor {
  const std::string* bytes;
  std::size_t pos;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* out = static_cast<std::string*>(png_get_error_ptr(png));
  *out = msg;
  png_longjmp(png, 1);
}

void png_warn_fn(png_structp, png_const_charp) {}

// Decoding happens inside setjmp scope: keep it free of objects with destructors.
bool decode_png(png_structp png, png_infop info, Cursor* cur, std::vector<std::uint16_t>* values,
                png_uint_32* width, png_uint_32* height, int* depth_bits, int* color) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_read_fn(png, cur, [](png_structp p, png_bytep out, png_size_t len) {
    auto* c = static_cast<Cursor*>(png_get_io_ptr(p));
    if (c->pos + len > c->bytes->size()) png_error(p, "unexpected end of data");
    std::memcpy(out, c->bytes->data() + c->pos, len);
    c->pos += len;
  });
  png_read_info(png, info);
  *width = png_get_image_width(png, info);
  *height = png_get_image_height(png, info);
  *depth_bits = png_get_bit_depth(png, info);
  *color = png_get_color_type(png, info);
  if (*depth_bits != 16 || *color != PNG_COLOR_TYPE_GRAY) return true;
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);
  values->resize(static_cast<std::size_t>(*width) * *height);
  for (png_uint_32 y = 0; y < *height; ++y) {
    png_read_row(png, reinterpret_cast<png_bytep>(values->data() + static_cast<std::size_t>(y) * *width), nullptr);
  }
  png_read_end(png, nullptr);
  return true;
}

DepthImage read_png(const std::string& bytes, const std::filesystem::path& path, std::int32_t scale_um) {
  const std::string where = "depth file '" + path.string() + "': ";
  std::string err;
  PngRead r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warn_fn);
  if (!r.png) throw FormatError(where + "cannot initialise PNG decoder");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw FormatError(where + "cannot initialise PNG decoder");
  Cursor cur{&bytes, 0};
  std::vector<std::uint16_t> values;
  png_uint_32 w = 0, h = 0;
  int bits = 0, color = 0;
  if (!decode_png(r.png, r.info, &cur, &values, &w, &h, &bits, &color)) throw FormatError(where + "PNG error: " + err);
  if (bits != 16 || color != PNG_COLOR_TYPE_GRAY) {
    throw FormatError(where + "expected 16-bit single-channel PNG, got " + std::to_string(bits) +
                      "-bit color type " + std::to_string(color));
  }
  DepthImage img(h, w);
  for (std::size_t i = 0; i < values.size(); ++i) img.mm[i] = decode_depth(values[i], scale_um);
  return img;
}

bool encode_png(png_structp png, png_infop info, std::FILE* f, const std::vector<std::uint16_t>* values,
                png_uint_32 width, png_uint_32 height) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);
  for (png_uint_32 y = 0; y < height; ++y) {
    png_write_row(png, reinterpret_cast<png_const_bytep>(values->data() + static_cast<std::size_t>(y) * width));
  }
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

std::uint16_t encode_depth(float mm, std::int32_t scale_um) {
  check_scale(scale_um);
  if (!std::isfinite(mm) || mm < 0) throw ValidationError("invalid depth value " + std::to_string(mm) + " mm");
  const double units = std::round(static_cast<double>(mm) * 1000.0 / scale_um);
  if (units > 65535.0) {
    throw ValidationError("depth " + std::to_string(mm) + " mm exceeds the 16-bit range at " +
                          std::to_string(scale_um) + " um/unit");
  }
  return static_cast<std::uint16_t>(units);
}

float decode_depth(std::uint16_t units, std::int32_t scale_um) {
  return static_cast<float>(static_cast<double>(units) * scale_um / 1000.0);
}

float quantize_depth(float mm, std::int32_t scale_um) { return decode_depth(encode_depth(mm, scale_um), scale_um); }

void write_depth_raw(const std::filesystem::path& path, const DepthImage& depth, std::int32_t scale_um) {
  check_scale(scale_um);
  std::string out;
  out.reserve(12 + 2 * depth.mm.size());
  put_i32(out, static_cast<std::int32_t>(depth.height));
  put_i32(out, static_cast<std::int32_t>(depth.width));
  put_i32(out, scale_um);
  for (float v : depth.mm) {
    const std::uint16_t u = encode_depth(v, scale_um);
    out.push_back(static_cast<char>(u & 0xff));
    out.push_back(static_cast<char>(u >> 8));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write depth file '" + path.string() + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("short write to depth file '" + path.string() + "'");
}

void write_depth_png(const std::filesystem::path& path, const DepthImage& depth, std::int32_t scale_um) {
  std::vector<std::uint16_t> values(depth.mm.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = encode_depth(depth.mm[i], scale_um);
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!f) throw FormatError("cannot write depth file '" + path.string() + "'");
  std::string err;
  PngWrite wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warn_fn);
  if (!wr.png) throw FormatError("cannot initialise PNG encoder");
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) throw FormatError("cannot initialise PNG encoder");
  if (!encode_png(wr.png, wr.info, f.get(), &values, static_cast<png_uint_32>(depth.width),
                  static_cast<png_uint_32>(depth.height))) {
    throw FormatError("PNG error writing '" + path.string() + "': " + err);
  }
}

DepthImage read_depth(const std::filesystem::path& path, std::int32_t png_scale_um) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open depth file '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) {
    check_scale(png_scale_um);
    return read_png(bytes, path, png_scale_um);
  }
  return read_raw(bytes, path);
}

}  // namespace hcrnn
