#include "mlg/vision/preprocess.hpp"

#include <cmath>

#include "mlg/error.hpp"
#include "mlg/vision/resample.hpp"

namespace mlg {

namespace {

std::vector<float> resized_planes(const Image& image, int side) {
  if (image.channels != 1 && image.channels != 3) throw ValidationError("images must have 1 or 3 channels");
  if (image.height < 1 || image.width < 1) throw ValidationError("empty image");
  const std::size_t plane = std::size_t(image.height) * image.width;
  std::vector<float> out(3 * std::size_t(side) * side);
  std::vector<float> src(plane);
  for (int c = 0; c < 3; ++c) {
    const int ic = image.channels == 1 ? 0 : c;
    for (std::size_t i = 0; i < plane; ++i) src[i] = image.pixels[i * image.channels + ic] / 255.0f;
    const auto r = (image.height == side && image.width == side)
                       ? src
                       : bilinear_resize(src.data(), image.height, image.width, side, side);
    std::copy(r.begin(), r.end(), out.begin() + c * std::size_t(side) * side);
  }
  return out;
}

}  // namespace

std::vector<float> preprocess(const Image& image, int side, const NormStats& stats) {
  auto t = resized_planes(image, side);
  const std::size_t plane = std::size_t(side) * side;
  for (int c = 0; c < 3; ++c) {
    const double sd = stats.std[c] < 1e-6 ? 1.0 : stats.std[c];
    for (std::size_t i = 0; i < plane; ++i) {
      float& v = t[c * plane + i];
      v = static_cast<float>((v - stats.mean[c]) / sd);
    }
  }
  return t;
}

NormStats compute_norm_stats(const std::vector<Image>& images, int side) {
  if (images.empty()) return {};
  std::array<double, 3> sum{}, sq{};
  double n = 0;
  const std::size_t plane = std::size_t(side) * side;
  for (const auto& img : images) {
    const auto t = resized_planes(img, side);
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = t[c * plane + i];
        sum[c] += v;
        sq[c] += v * v;
      }
    n += static_cast<double>(plane);
  }
  NormStats s;
  for (int c = 0; c < 3; ++c) {
    s.mean[c] = sum[c] / n;
    s.std[c] = std::sqrt(std::max(0.0, sq[c] / n - s.mean[c] * s.mean[c]));
  }
  return s;
}

}  // namespace mlg
