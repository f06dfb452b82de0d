#pragma once

#include <span>
#include <vector>

#include "mlg/align/model.hpp"
#include "mlg/text/tokenizer.hpp"

namespace mlg {

// One image–report pair ready for the model: tokenized text and the
// preprocessed image (in_channels × side², planar).
template <typename T>
struct TrainItem {
  TokenizedReport tok;
  std::vector<T> image;
};

struct LossBreakdown {
  double sw = 0;
  double ds = 0;
  double gr = 0;
  double total = 0;
};

template <typename T>
struct BatchResult {
  LossBreakdown loss;
  // Indexed by parameter slot (Model::parameters() order); empty without grads.
  std::vector<std::vector<T>> grads;
};

// Evaluates the enabled loss terms on one batch and, with `with_grads`, the
// gradient of their sum w.r.t. every parameter. Disabled terms are not
// evaluated and contribute exactly zero. Per-sample work runs on up to
// `threads` threads; reductions follow sample order, so results do not depend
// on the thread count. Throws NumericalError when a term is not finite.
template <typename T>
BatchResult<T> evaluate_batch(const Model<T>& model, std::span<const TrainItem<T>> items, const LossSwitches& switches,
                              bool with_grads, int threads = 1);

extern template BatchResult<float> evaluate_batch(const Model<float>&, std::span<const TrainItem<float>>,
                                                  const LossSwitches&, bool, int);
extern template BatchResult<double> evaluate_batch(const Model<double>&, std::span<const TrainItem<double>>,
                                                   const LossSwitches&, bool, int);

}  // namespace mlg
