#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "mlg/align/batch.hpp"
#include "mlg/align/model.hpp"
#include "mlg/data/corpus.hpp"
#include "mlg/text/augment.hpp"
#include "mlg/text/tokenizer.hpp"

namespace mlg {

struct TrainConfig {
  int batch = 128;
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr_decay = 0.9;
  int epochs = 6;
  std::uint64_t seed = 0;
  LossSwitches switches;
  AugmentParams augment;
  int threads = 1;

  // Learning rate used during epoch `epoch` (0-based).
  double lr_at(int epoch) const;
  void validate() const;
};

// Everything needed to continue training bit-identically.
struct TrainState {
  int epoch = 0;  // completed epochs
  std::int64_t step = 0;
  std::int64_t adam_t = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<std::vector<float>> m, v;
  std::vector<std::vector<float>> best;  // parameters of the best epoch so far
};

struct StepRecord {
  int epoch = 0;  // 1-based
  std::int64_t step = 0;
  LossBreakdown loss;
  double lr = 0;
};

struct EpochSummary {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;  // NaN without a validation split
  double lr = 0;
  bool improved = false;
};

// Reports with their preprocessed images (parallel vectors).
struct TrainSplit {
  std::vector<Report> reports;
  std::vector<std::vector<float>> images;
  std::size_t size() const { return reports.size(); }
};

struct TrainCallbacks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochSummary&, const Model<float>&, const TrainState&)> on_epoch;
};

struct TrainResult {
  Model<float> best;  // lowest validation loss; the last epoch without validation data
  Model<float> last;
  TrainState state;
  std::vector<StepRecord> log;
  std::vector<EpochSummary> epochs;
};

// Adam with per-epoch learning-rate decay. Epoch order and per-sample
// augmentation draw from (seed, epoch, sample)-indexed streams, so a run
// resumed from `state` continues exactly as an uninterrupted one.
// `max_epochs_this_call` < 0 runs to cfg.epochs. On a non-finite loss throws
// NumericalError naming the epoch, step and report ids of the batch.
TrainResult train(Model<float> model, const Vocabulary& vocab, const TrainSplit& train_split,
                  const TrainSplit* val_split, const TrainConfig& cfg, TrainState state = {},
                  const TrainCallbacks& callbacks = {}, int max_epochs_this_call = -1);

// Mean total loss over consecutive batches of `batch` samples, no augmentation.
double validation_loss(const Model<float>& model, const Vocabulary& vocab, const TrainSplit& split, int batch,
                       const LossSwitches& switches, int threads);

// Parameter values in slot order, for checksums and comparisons.
std::vector<std::vector<float>> snapshot(const Model<float>& model);
void restore(Model<float>& model, const std::vector<std::vector<float>>& values);

}  // namespace mlg
