#pragma once

#include <array>
#include <span>
#include <vector>

#include "mlg/autodiff.hpp"
#include "mlg/matrix.hpp"
#include "mlg/rng.hpp"

namespace mlg {

// Tape handles for one image. Feature maps are (channels × positions) with
// positions in row-major grid order.
struct BackboneVars {
  ad::Var shallow;  // C_s × G²
  ad::Var deep;     // C_d × (G/2)²
  ad::Var pooled;   // C_d × 1
  int grid = 0;     // G
};

template <typename T>
struct BackboneFeatures {
  Matrix<T> shallow;
  Matrix<T> deep;
  std::vector<T> pooled;
  int grid = 0;
};

// Four 3×3 stride-2 convolution stages with bias and ReLU. The shallow level
// is the output of the third stage (side/8), the deep level the fourth
// (side/16), and pooled is the spatial mean of the fourth.
template <typename T>
class ToyBackbone {
 public:
  ToyBackbone() = default;
  ToyBackbone(int in_channels, std::array<int, 4> channels, int side);

  void init(Engine& rng);

  int side() const { return side_; }
  int in_channels() const { return in_channels_; }
  int grid() const { return side_ / 8; }
  int shallow_channels() const { return channels_[2]; }
  int deep_channels() const { return channels_[3]; }
  std::vector<ad::Parameter<T>>& params() { return params_; }
  const std::vector<ad::Parameter<T>>& params() const { return params_; }

  // x: in_channels × side², planar.
  BackboneVars forward(ad::Tape<T>& tape, ad::Var x, int slot_base) const;

 private:
  int in_channels_ = 0;
  std::array<int, 4> channels_{};
  int side_ = 0;
  std::vector<ad::Parameter<T>> params_;  // (kernel, bias) per stage
};

// Inference entry; throws ValidationError if x has the wrong size.
template <typename T>
BackboneFeatures<T> encode_image(std::span<const T> x, const ToyBackbone<T>& backbone);

extern template class ToyBackbone<float>;
extern template class ToyBackbone<double>;

}  // namespace mlg
