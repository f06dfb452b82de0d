#pragma once

#include <string>
#include <vector>

#include "mlg/autodiff.hpp"
#include "mlg/error.hpp"
#include "mlg/matrix.hpp"
#include "mlg/text/tokenizer.hpp"

namespace mlg {

enum class WordAggregation { Sum, Mean };

WordAggregation parse_word_aggregation(const std::string& s);
std::string to_string(WordAggregation a);

// Encoder output, layers × tokens × dim.
template <typename T>
struct LayerFeatures {
  int layers = 0;
  int tokens = 0;
  int dim = 0;
  std::vector<T> data;

  LayerFeatures() = default;
  LayerFeatures(int l, int h, int d) : layers(l), tokens(h), dim(d), data(std::size_t(l) * h * d, T(0)) {}
  T& at(int l, int h, int d) { return data[(std::size_t(l) * tokens + h) * dim + d]; }
  T at(int l, int h, int d) const { return data[(std::size_t(l) * tokens + h) * dim + d]; }
};

template <typename T>
struct TextHierarchy {
  Matrix<T> t_w;  // Q × D
  Matrix<T> t_s;  // P × D
  std::vector<T> t_r;
  std::vector<int> sentence_of_word;
};

// Number of trailing layers averaged into the subword feature: min(4, L).
// Warns once when fewer than four layers exist.
int mixed_layer_count(int layers);

// Linear maps from the valid subword rows (valid_len × D) to each level:
// word (Q × valid_len), sentence (P × valid_len), report (1 × valid_len).
// Throws ValidationError on an empty span.
struct AggregationWeights {
  Matrix<double> word;
  Matrix<double> sentence;
  Matrix<double> report;
};
AggregationWeights aggregation_weights(const TokenizedReport& tok, WordAggregation agg);

template <typename T>
Matrix<T> cast_matrix(const Matrix<double>& m) {
  Matrix<T> out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = static_cast<T>(m.data[i]);
  return out;
}

template <typename T>
TextHierarchy<T> aggregate_hierarchy(const LayerFeatures<T>& feats, const TokenizedReport& tok,
                                     WordAggregation agg = WordAggregation::Sum) {
  if (feats.layers < 1) throw ValidationError("layer features need at least one layer");
  if (feats.tokens < tok.valid_len) throw ValidationError("layer features shorter than the tokenized report");
  const auto w = aggregation_weights(tok, agg);
  const int k = mixed_layer_count(feats.layers);
  const int n = tok.valid_len, d = feats.dim;
  std::vector<double> sub(std::size_t(n) * d, 0.0);
  for (int l = feats.layers - k; l < feats.layers; ++l)
    for (int h = 0; h < n; ++h)
      for (int j = 0; j < d; ++j) sub[std::size_t(h) * d + j] += feats.at(l, h, j);
  for (auto& s : sub) s /= k;

  auto apply = [&](const Matrix<double>& a) {
    Matrix<T> out(a.rows, d);
    for (int r = 0; r < a.rows; ++r)
      for (int h = 0; h < n; ++h) {
        const double c = a(r, h);
        if (c == 0.0) continue;
        for (int j = 0; j < d; ++j) out(r, j) += static_cast<T>(c * sub[std::size_t(h) * d + j]);
      }
    return out;
  };
  TextHierarchy<T> out;
  out.t_w = apply(w.word);
  out.t_s = apply(w.sentence);
  out.t_r = apply(w.report).data;
  out.sentence_of_word = tok.sentence_of_word;
  return out;
}

// Tape version over per-layer outputs (each valid_len × D); returns
// {t_w, t_s, t_r} as (Q×D), (P×D), (1×D).
template <typename T>
struct HierarchyVars {
  ad::Var t_w, t_s, t_r;
};

template <typename T>
HierarchyVars<T> aggregate_hierarchy(ad::Tape<T>& tape, const std::vector<ad::Var>& layers,
                                     const TokenizedReport& tok, WordAggregation agg) {
  if (layers.empty()) throw ValidationError("layer features need at least one layer");
  const int k = mixed_layer_count(static_cast<int>(layers.size()));
  ad::Var sub = layers[layers.size() - k];
  for (std::size_t l = layers.size() - k + 1; l < layers.size(); ++l) sub = tape.add(sub, layers[l]);
  if (k > 1) sub = tape.scale(sub, T(1) / T(k));
  const auto w = aggregation_weights(tok, agg);
  auto apply = [&](const Matrix<double>& a) {
    const auto m = cast_matrix<T>(a);
    return tape.matmul(tape.constant(m.data, m.rows, m.cols), sub);
  };
  return {apply(w.word), apply(w.sentence), apply(w.report)};
}

}  // namespace mlg
