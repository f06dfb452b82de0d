#pragma once

#include <span>
#include <vector>

#include "mlg/autodiff.hpp"
#include "mlg/rng.hpp"
#include "mlg/text/hierarchy.hpp"
#include "mlg/text/tokenizer.hpp"

namespace mlg {

// Built-in text encoder: token embedding followed by residual width-3
// convolution layers, h_l = h_{l-1} + tanh(conv(h_{l-1})). Layer outputs are
// the embedding plus every mixing layer, so L = 1 + mixing_layers.
// Positions at or beyond valid_len are treated as zeros by the convolutions.
template <typename T>
class ToyTextEncoder {
 public:
  ToyTextEncoder() = default;
  ToyTextEncoder(int vocab_size, int dim, int mixing_layers);

  void init(Engine& rng);

  int layers() const { return 1 + mixing_; }
  int dim() const { return dim_; }
  int vocab_size() const { return vocab_; }
  std::vector<ad::Parameter<T>>& params() { return params_; }
  const std::vector<ad::Parameter<T>>& params() const { return params_; }

  // One (ids.size() × D) var per layer. Parameter slots start at slot_base.
  std::vector<ad::Var> forward(ad::Tape<T>& tape, std::span<const int> ids, int valid_len, int slot_base) const;

 private:
  int vocab_ = 0;
  int dim_ = 0;
  int mixing_ = 0;
  std::vector<ad::Parameter<T>> params_;  // embedding, then (weight, bias) per layer
};

// Features at every one of the H positions, padding included. Throws
// ValidationError for ids outside the vocabulary.
template <typename T>
LayerFeatures<T> encode_text(const TokenizedReport& tok, const ToyTextEncoder<T>& enc);

extern template class ToyTextEncoder<float>;
extern template class ToyTextEncoder<double>;

}  // namespace mlg
