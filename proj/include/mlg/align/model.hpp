#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlg/autodiff.hpp"
#include "mlg/text/encoder.hpp"
#include "mlg/text/hierarchy.hpp"
#include "mlg/vision/backbone.hpp"
#include "mlg/vision/projection.hpp"

namespace mlg {

// Temperatures divide the logits inside the exponent: exp(s / tau).
struct Temperatures {
  double tau1 = 0.25;  // attention over image positions
  double tau2 = 0.2;   // log-sum-exp aggregation of item matches
  double tau3 = 0.1;   // contrastive softmax
  std::optional<double> tau3_sw, tau3_ds, tau3_gr;

  double sw() const { return tau3_sw.value_or(tau3); }
  double ds() const { return tau3_ds.value_or(tau3); }
  double gr() const { return tau3_gr.value_or(tau3); }
  // Throws ValidationError unless every temperature is finite and positive.
  void validate() const;
};

struct LossSwitches {
  bool sw = true;  // words vs shallow positions
  bool ds = true;  // sentences vs deep positions
  bool gr = true;  // report vs pooled image
  bool any() const { return sw || ds || gr; }
  std::string label() const;  // e.g. "SW+GR"
  bool operator==(const LossSwitches&) const = default;
};

// Architecture; everything here feeds the checkpoint fingerprint.
struct ModelConfig {
  int dim = 768;
  int image_side = 224;
  int in_channels = 3;
  std::array<int, 4> channels{8, 16, 32, 32};
  int text_layers = 4;
  int vocab_size = 2;
  int max_tokens = 64;
  WordAggregation word_agg = WordAggregation::Sum;

  int grid() const { return image_side / 8; }
  std::string describe() const;
  std::uint64_t fingerprint() const;
  void validate() const;
};

// Parameters are addressed by slot: text encoder first, then backbone, then
// projection heads.
template <typename T>
struct Model {
  ModelConfig config;
  Temperatures temps;
  ToyTextEncoder<T> text;
  ToyBackbone<T> vision;
  ProjectionHeads<T> heads;

  Model() = default;
  explicit Model(const ModelConfig& cfg);

  void init(std::uint64_t seed);

  int vision_slot_base() const { return static_cast<int>(text.params().size()); }
  int head_slot_base() const { return vision_slot_base() + static_cast<int>(vision.params().size()); }
  std::vector<ad::Parameter<T>*> parameters();
  std::vector<const ad::Parameter<T>*> parameters() const;
  std::size_t parameter_count() const;

  template <typename U>
  Model<U> cast() const {
    Model<U> out(config);
    out.temps = temps;
    auto dst = out.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i)
      for (std::size_t j = 0; j < src[i]->value.size(); ++j) dst[i]->value[j] = static_cast<U>(src[i]->value[j]);
    return out;
  }
};

extern template struct Model<float>;
extern template struct Model<double>;

}  // namespace mlg
