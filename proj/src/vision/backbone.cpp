#include "mlg/vision/backbone.hpp"

#include <cmath>
#include <string>

#include "mlg/error.hpp"

namespace mlg {

template <typename T>
ToyBackbone<T>::ToyBackbone(int in_channels, std::array<int, 4> channels, int side)
    : in_channels_(in_channels), channels_(channels), side_(side) {
  if (side < 16 || side % 16 != 0) throw ValidationError("image side must be a positive multiple of 16");
  if (in_channels < 1) throw ValidationError("backbone needs at least one input channel");
  int cin = in_channels;
  for (int s = 0; s < 4; ++s) {
    if (channels[s] < 1) throw ValidationError("backbone stage channels must be positive");
    params_.emplace_back("vision.stage" + std::to_string(s + 1) + ".kernel", channels[s], cin * 9);
    params_.emplace_back("vision.stage" + std::to_string(s + 1) + ".bias", channels[s], 1);
    cin = channels[s];
  }
}

template <typename T>
void ToyBackbone<T>::init(Engine& rng) {
  for (int s = 0; s < 4; ++s) {
    auto& k = params_[2 * s];
    const double scale = std::sqrt(2.0 / k.cols);
    for (auto& v : k.value) v = static_cast<T>(scale * standard_normal(rng));
    for (auto& v : params_[2 * s + 1].value) v = T(0);
  }
}

template <typename T>
BackboneVars ToyBackbone<T>::forward(ad::Tape<T>& tape, ad::Var x, int slot_base) const {
  if (tape.rows(x) != in_channels_ || tape.cols(x) != side_ * side_)
    throw ValidationError("backbone input must be " + std::to_string(in_channels_) + "x" + std::to_string(side_) +
                          "x" + std::to_string(side_));
  BackboneVars out;
  int cin = in_channels_, hw = side_;
  ad::Var h = x;
  for (int s = 0; s < 4; ++s) {
    ad::ConvGeometry g{cin, hw, hw, 3, 2, 1};
    const ad::Var k = tape.param(params_[2 * s], slot_base + 2 * s);
    const ad::Var b = tape.param(params_[2 * s + 1], slot_base + 2 * s + 1);
    h = tape.relu(tape.add_col_bias(tape.matmul(k, tape.im2col(h, g)), b));
    cin = channels_[s];
    hw = g.out_height();
    if (s == 2) out.shallow = h;
  }
  out.deep = h;
  out.pooled = tape.mean_cols(h);
  out.grid = grid();
  return out;
}

template <typename T>
BackboneFeatures<T> encode_image(std::span<const T> x, const ToyBackbone<T>& backbone) {
  const std::size_t want = std::size_t(backbone.in_channels()) * backbone.side() * backbone.side();
  if (x.size() != want) throw ValidationError("image tensor has " + std::to_string(x.size()) + " values, expected " +
                                              std::to_string(want));
  ad::Tape<T> tape(false);
  const auto in = tape.constant({x.begin(), x.end()}, backbone.in_channels(), backbone.side() * backbone.side());
  const auto v = backbone.forward(tape, in, 0);
  auto grab = [&](ad::Var var) {
    const auto s = tape.value(var);
    return Matrix<T>(tape.rows(var), tape.cols(var), {s.begin(), s.end()});
  };
  BackboneFeatures<T> f;
  f.shallow = grab(v.shallow);
  f.deep = grab(v.deep);
  const auto p = tape.value(v.pooled);
  f.pooled.assign(p.begin(), p.end());
  f.grid = v.grid;
  return f;
}

template class ToyBackbone<float>;
template class ToyBackbone<double>;
template BackboneFeatures<float> encode_image(std::span<const float>, const ToyBackbone<float>&);
template BackboneFeatures<double> encode_image(std::span<const double>, const ToyBackbone<double>&);

}  // namespace mlg
