#include "mlg/text/encoder.hpp"

#include <cmath>
#include <string>

#include "mlg/error.hpp"

namespace mlg {

template <typename T>
ToyTextEncoder<T>::ToyTextEncoder(int vocab_size, int dim, int mixing_layers)
    : vocab_(vocab_size), dim_(dim), mixing_(mixing_layers) {
  if (vocab_size < 2 || dim < 1 || mixing_layers < 0) throw ValidationError("invalid text encoder shape");
  params_.emplace_back("text.embedding", vocab_size, dim);
  for (int l = 0; l < mixing_layers; ++l) {
    params_.emplace_back("text.mix" + std::to_string(l) + ".weight", 3 * dim, dim);
    params_.emplace_back("text.mix" + std::to_string(l) + ".bias", 1, dim);
  }
}

template <typename T>
void ToyTextEncoder<T>::init(Engine& rng) {
  for (auto& v : params_[0].value) v = static_cast<T>(standard_normal(rng));
  const double s = 1.0 / std::sqrt(3.0 * dim_);
  for (int l = 0; l < mixing_; ++l) {
    for (auto& v : params_[1 + 2 * l].value) v = static_cast<T>(s * standard_normal(rng));
    for (auto& v : params_[2 + 2 * l].value) v = T(0);
  }
}

template <typename T>
std::vector<ad::Var> ToyTextEncoder<T>::forward(ad::Tape<T>& tape, std::span<const int> ids, int valid_len,
                                                int slot_base) const {
  for (int id : ids)
    if (id < 0 || id >= vocab_) throw ValidationError("token id " + std::to_string(id) + " outside vocabulary");
  std::vector<ad::Var> out;
  ad::Var h = tape.gather_rows(tape.param(params_[0], slot_base), ids);
  out.push_back(h);
  for (int l = 0; l < mixing_; ++l) {
    const ad::Var w = tape.param(params_[1 + 2 * l], slot_base + 1 + 2 * l);
    const ad::Var b = tape.param(params_[2 + 2 * l], slot_base + 2 + 2 * l);
    const ad::Var mixed = tape.tanh(tape.add_row_bias(tape.matmul(tape.im2col_1d(h, 3, valid_len), w), b));
    h = tape.add(h, mixed);
    out.push_back(h);
  }
  return out;
}

template <typename T>
LayerFeatures<T> encode_text(const TokenizedReport& tok, const ToyTextEncoder<T>& enc) {
  ad::Tape<T> tape(false);
  const auto layers = enc.forward(tape, tok.token_ids, tok.valid_len, 0);
  const int h = static_cast<int>(tok.token_ids.size());
  LayerFeatures<T> f(static_cast<int>(layers.size()), h, enc.dim());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto v = tape.value(layers[l]);
    std::copy(v.begin(), v.end(), f.data.begin() + l * std::size_t(h) * enc.dim());
  }
  return f;
}

template class ToyTextEncoder<float>;
template class ToyTextEncoder<double>;
template LayerFeatures<float> encode_text(const TokenizedReport&, const ToyTextEncoder<float>&);
template LayerFeatures<double> encode_text(const TokenizedReport&, const ToyTextEncoder<double>&);

}  // namespace mlg
