#include "mlg/text/hierarchy.hpp"

#include <atomic>

#include "mlg/log.hpp"

namespace mlg {

WordAggregation parse_word_aggregation(const std::string& s) {
  if (s == "sum") return WordAggregation::Sum;
  if (s == "mean") return WordAggregation::Mean;
  throw ValidationError("word aggregation must be 'sum' or 'mean', got '" + s + "'");
}

std::string to_string(WordAggregation a) { return a == WordAggregation::Sum ? "sum" : "mean"; }

int mixed_layer_count(int layers) {
  if (layers >= 4) return 4;
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true))
    log::warn("text encoder exposes " + std::to_string(layers) + " layer(s); averaging all of them");
  return layers;
}

AggregationWeights aggregation_weights(const TokenizedReport& tok, WordAggregation agg) {
  const int n = tok.valid_len;
  if (n < 1) throw ValidationError("tokenized report has no valid tokens");
  auto check = [&](const Span& s, const char* what) {
    if (s.size() <= 0) throw ValidationError(std::string("empty ") + what + " span");
    if (s.begin < 0 || s.end > n) throw ValidationError(std::string(what) + " span beyond valid tokens");
  };
  AggregationWeights w{Matrix<double>(tok.words(), n), Matrix<double>(tok.sentences(), n), Matrix<double>(1, n)};
  for (int i = 0; i < tok.words(); ++i) {
    const Span& s = tok.word_spans[i];
    check(s, "word");
    const double c = agg == WordAggregation::Sum ? 1.0 : 1.0 / s.size();
    for (int h = s.begin; h < s.end; ++h) w.word(i, h) = c;
  }
  for (int j = 0; j < tok.sentences(); ++j) {
    const Span& s = tok.sentence_spans[j];
    check(s, "sentence");
    for (int h = s.begin; h < s.end; ++h) w.sentence(j, h) = 1.0 / s.size();
  }
  for (int h = 0; h < n; ++h) w.report(0, h) = 1.0 / n;
  return w;
}

}  // namespace mlg
