#pragma once

#include <string>
#include <vector>

#include "mlg/align/batch.hpp"
#include "mlg/align/model.hpp"
#include "mlg/text/tokenizer.hpp"
#include "support.hpp"

namespace test {

inline mlg::Vocabulary small_vocab() {
  return mlg::Vocabulary::from_words({"a", "red", "blue", "green", "circle", "box", "square", "left", "right", "in",
                                      "the", "upper", "lower", "no", "shows"});
}

// D=8 and a 32-pixel input (M = 16 shallow positions).
inline mlg::ModelConfig small_config(int vocab_size) {
  mlg::ModelConfig c;
  c.dim = 8;
  c.image_side = 32;
  c.channels = {4, 4, 6, 6};
  c.text_layers = 2;
  c.vocab_size = vocab_size;
  c.max_tokens = 12;
  return c;
}

// Biases are nudged off zero so no ReLU input sits exactly on its kink.
template <typename T>
mlg::Model<T> small_model(std::uint64_t seed, const mlg::Vocabulary& vocab) {
  mlg::Model<T> m(small_config(vocab.size()));
  m.init(seed);
  mlg::Engine rng(seed + 1000);
  for (auto* p : m.parameters())
    if (p->name.find("bias") != std::string::npos)
      for (auto& v : p->value) v = static_cast<T>(0.05 * mlg::standard_normal(rng));
  return m;
}

// B=3 reports with P=2 sentences and Q=4 words each.
template <typename T>
std::vector<mlg::TrainItem<T>> small_items(const mlg::Vocabulary& vocab, std::uint64_t seed,
                                           std::vector<std::string> texts = {"red circle. blue box.",
                                                                             "green square. red box.",
                                                                             "blue circle. green box."}) {
  mlg::Engine rng(seed);
  std::vector<mlg::TrainItem<T>> items;
  for (const auto& t : texts) items.push_back({mlg::tokenize(t, vocab, 12), normal<T>(rng, 3 * 32 * 32)});
  return items;
}

}  // namespace test
