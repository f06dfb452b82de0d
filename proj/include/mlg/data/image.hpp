#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

namespace mlg {

// 8-bit raster, interleaved channels (1 = gray, 3 = RGB), row-major.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, int c) : height(h), width(w), channels(c), pixels(std::size_t(h) * w * c, 0) {}
  std::uint8_t& at(int y, int x, int c) { return pixels[(std::size_t(y) * width + x) * channels + c]; }
  std::uint8_t at(int y, int x, int c) const { return pixels[(std::size_t(y) * width + x) * channels + c]; }
  bool operator==(const Image&) const = default;
};

// Binary raster holding 0/1 per pixel.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;
  // Threshold that produced the mask; NaN for ground truth.
  double threshold = std::numeric_limits<double>::quiet_NaN();

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), bits(std::size_t(h) * w, 0) {}
  std::uint8_t& at(int y, int x) { return bits[std::size_t(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return bits[std::size_t(y) * width + x]; }
  std::size_t count() const;
  bool same_pixels(const Mask& o) const { return height == o.height && width == o.width && bits == o.bits; }
};

// Throws InputError when the file is missing or not a decodable 8-bit PNG.
// Gray+alpha and RGBA inputs are reduced to gray and RGB.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

// Nonzero pixels of channel 0 become 1.
Mask read_mask_png(const std::filesystem::path& path);
// Writes 0/255 grayscale.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

}  // namespace mlg
