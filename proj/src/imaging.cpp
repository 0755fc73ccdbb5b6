#include "oasic/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "binio.hpp"
#include "oasic/error.hpp"

namespace oasic {

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

}  // namespace detail

namespace {

std::size_t area(int width, int height) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

void check_dims(int width, int height, const char* what) {
  require(width >= 1 && height >= 1, std::string(what) + ": dimensions must be >= 1");
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  bool color = false;
  std::vector<std::uint8_t> bytes;  // in the requested output format
};

// Decodes to 8-bit RGB (want_rgb) or 8-bit gray.
DecodedPng decode_png(const std::filesystem::path& path, bool want_rgb) {
  const std::vector<std::uint8_t> file = detail::read_file(path);
  if (file.size() < 8 || png_sig_cmp(file.data(), 0, 8) != 0) {
    fail(ErrorKind::kFormat, path.string() + ": corrupt header (not a PNG)");
  }

  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, file.data(), file.size())) {
    fail(ErrorKind::kFormat, path.string() + ": corrupt header: " + img.message);
  }
  if (img.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&img);
    fail(ErrorKind::kFormat, path.string() + ": unsupported bit depth (16-bit)");
  }

  DecodedPng out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  if (out.width < 1 || out.height < 1) {
    png_image_free(&img);
    fail(ErrorKind::kFormat, path.string() + ": zero dimension");
  }

  img.format = want_rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  out.bytes.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.bytes.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorKind::kFormat, path.string() + ": " + msg);
  }
  return out;
}

void encode_png(const std::filesystem::path& path, int width, int height, bool rgb,
                const std::uint8_t* data) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, data, 0, nullptr)) {
    fail(ErrorKind::kIo, "cannot write " + path.string() + ": " + img.message);
  }
}

}  // namespace

Image::Image(int width, int height, Rgb fill)
    : width_(width), height_(height), pixels_(area(width, height), fill) {
  check_dims(width, height, "Image");
}

Image::Image(int width, int height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height, "Image");
  require(pixels_.size() == area(width, height), "Image: pixel count mismatch");
}

OcclusionMask::OcclusionMask(int width, int height, bool fill)
    : width_(width), height_(height), bits_(area(width, height), fill ? 1 : 0) {
  check_dims(width, height, "OcclusionMask");
}

OcclusionMask::OcclusionMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  check_dims(width, height, "OcclusionMask");
  require(bits_.size() == area(width, height), "OcclusionMask: bit count mismatch");
  for (auto& b : bits_) require(b <= 1, "OcclusionMask: values must be 0 or 1");
}

std::size_t OcclusionMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double OcclusionMask::coverage() const {
  return bits_.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits_.size());
}

AnomalyMap::AnomalyMap(int width, int height, float fill)
    : width_(width), height_(height), values_(area(width, height), fill) {
  check_dims(width, height, "AnomalyMap");
  require(fill >= 0.0f && fill <= 1.0f, "AnomalyMap: value outside [0,1]");
}

AnomalyMap::AnomalyMap(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_dims(width, height, "AnomalyMap");
  require(values_.size() == area(width, height), "AnomalyMap: value count mismatch");
  for (float v : values_) {
    require(v >= 0.0f && v <= 1.0f, "AnomalyMap: value outside [0,1]");
  }
}

AnomalyMap AnomalyMap::from_mask(const OcclusionMask& mask) {
  std::vector<float> values(mask.bits().begin(), mask.bits().end());
  return AnomalyMap(mask.width(), mask.height(), std::move(values));
}

Image read_image(const std::filesystem::path& path) {
  DecodedPng png = decode_png(path, /*want_rgb=*/true);
  std::vector<Rgb> pixels(area(png.width, png.height));
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = {png.bytes[3 * i], png.bytes[3 * i + 1], png.bytes[3 * i + 2]};
  }
  return Image(png.width, png.height, std::move(pixels));
}

void write_image(const Image& image, const std::filesystem::path& path) {
  require(!image.empty(), "write_image: empty image");
  static_assert(sizeof(Rgb) == 3);
  encode_png(path, image.width(), image.height(), true,
             reinterpret_cast<const std::uint8_t*>(image.pixels().data()));
}

OcclusionMask read_mask(const std::filesystem::path& path) {
  DecodedPng png = decode_png(path, /*want_rgb=*/false);
  if (png.color) fail(ErrorKind::kFormat, path.string() + ": mask is not grayscale");
  std::vector<std::uint8_t> bits(png.bytes.size());
  std::transform(png.bytes.begin(), png.bytes.end(), bits.begin(),
                 [](std::uint8_t v) { return std::uint8_t{v >= 128}; });
  return OcclusionMask(png.width, png.height, std::move(bits));
}

void write_mask(const OcclusionMask& mask, const std::filesystem::path& path) {
  require(mask.width() >= 1 && mask.height() >= 1, "write_mask: zero dimension");
  std::vector<std::uint8_t> gray(mask.bits().size());
  std::transform(mask.bits().begin(), mask.bits().end(), gray.begin(),
                 [](std::uint8_t b) { return b ? std::uint8_t{255} : std::uint8_t{0}; });
  encode_png(path, mask.width(), mask.height(), false, gray.data());
}

AnomalyMap read_amap(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file(path);
  detail::ByteReader in(bytes, path.string());
  in.expect_magic("AMAP");
  const std::uint32_t version = in.u32();
  if (version != 1) fail(ErrorKind::kFormat, path.string() + ": unsupported version");
  const std::uint32_t height = in.u32();
  const std::uint32_t width = in.u32();
  if (width == 0 || height == 0) fail(ErrorKind::kFormat, path.string() + ": zero dimension");
  const std::size_t n = std::size_t{width} * height;
  in.expect_remaining(n * 4);
  std::vector<float> values(n);
  for (auto& v : values) {
    v = in.f32();
    if (!(v >= 0.0f && v <= 1.0f)) fail(ErrorKind::kFormat, path.string() + ": value outside [0,1]");
  }
  return AnomalyMap(static_cast<int>(width), static_cast<int>(height), std::move(values));
}

void write_amap(const AnomalyMap& map, const std::filesystem::path& path) {
  require(map.width() >= 1 && map.height() >= 1, "write_amap: empty map");
  detail::ByteWriter out;
  out.magic("AMAP");
  out.u32(1);
  out.u32(static_cast<std::uint32_t>(map.height()));
  out.u32(static_cast<std::uint32_t>(map.width()));
  for (float v : map.values()) {
    require(v >= 0.0f && v <= 1.0f, "write_amap: value outside [0,1]");
    out.f32(v);
  }
  detail::write_file(path, out.bytes());
}

}  // namespace oasic
