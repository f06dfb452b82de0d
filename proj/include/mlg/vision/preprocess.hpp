#pragma once

#include <array>
#include <vector>

#include "mlg/data/image.hpp"

namespace mlg {

// Per-channel statistics on the [0, 1] intensity scale.
struct NormStats {
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> std{0.25, 0.25, 0.25};
  bool operator==(const NormStats&) const = default;
};

// Planar channels × side × side tensor. Gray images are replicated to three
// channels. Channels with std below 1e-6 are only centered.
std::vector<float> preprocess(const Image& image, int side, const NormStats& stats);

// Mean and population std over the resized pixels of all images.
NormStats compute_norm_stats(const std::vector<Image>& images, int side);

}  // namespace mlg
