#include "mlg/align/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "mlg/error.hpp"
#include "mlg/log.hpp"
#include "mlg/rng.hpp"

namespace mlg {

namespace {

constexpr std::uint64_t kOrderStream = 0x6f72646572ull;
constexpr std::uint64_t kAugmentStream = 0x6175676dull;

std::vector<TrainItem<float>> make_items(const TrainSplit& split, std::span<const std::size_t> idx,
                                         const Vocabulary& vocab, int max_tokens, const AugmentParams* augment,
                                         std::uint64_t seed, int epoch) {
  std::vector<TrainItem<float>> items;
  items.reserve(idx.size());
  for (std::size_t i : idx) {
    const Report& r = split.reports[i];
    TrainItem<float> item;
    if (augment) {
      Engine rng(substream(substream(seed, kAugmentStream), static_cast<std::uint64_t>(epoch), i));
      item.tok = tokenize(augment_report(r, rng, *augment), vocab, max_tokens);
    } else {
      item.tok = tokenize(r, vocab, max_tokens);
    }
    item.image = split.images[i];
    items.push_back(std::move(item));
  }
  return items;
}

std::string ids_of(const TrainSplit& split, std::span<const std::size_t> idx) {
  std::string s;
  for (std::size_t i : idx) s += (s.empty() ? "" : ",") + split.reports[i].id;
  return s;
}

}  // namespace

double TrainConfig::lr_at(int epoch) const { return lr * std::pow(lr_decay, epoch); }

void TrainConfig::validate() const {
  if (batch < 1) throw ValidationError("batch must be >= 1");
  if (!(lr > 0)) throw ValidationError("lr must be positive");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw ValidationError("lr_decay must be in (0, 1]");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ValidationError("Adam betas must be in [0, 1)");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!switches.any()) throw ValidationError("at least one loss switch must be enabled");
  if (!(augment.keep_ratio > 0 && augment.keep_ratio <= 1)) throw ValidationError("keep_ratio must be in (0, 1]");
}

std::vector<std::vector<float>> snapshot(const Model<float>& model) {
  std::vector<std::vector<float>> out;
  for (const auto* p : model.parameters()) out.push_back(p->value);
  return out;
}

void restore(Model<float>& model, const std::vector<std::vector<float>>& values) {
  auto params = model.parameters();
  if (values.size() != params.size()) throw ValidationError("parameter snapshot has the wrong number of tensors");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].size() != params[i]->size()) throw ValidationError("parameter snapshot shape mismatch");
    params[i]->value = values[i];
  }
}

double validation_loss(const Model<float>& model, const Vocabulary& vocab, const TrainSplit& split, int batch,
                       const LossSwitches& switches, int threads) {
  if (split.size() == 0) return std::nan("");
  std::vector<std::size_t> idx(split.size());
  std::iota(idx.begin(), idx.end(), 0);
  double sum = 0;
  int n = 0;
  for (std::size_t b = 0; b < idx.size(); b += batch) {
    const std::span<const std::size_t> chunk(idx.data() + b, std::min<std::size_t>(batch, idx.size() - b));
    const auto items = make_items(split, chunk, vocab, model.config.max_tokens, nullptr, 0, 0);
    sum += evaluate_batch<float>(model, items, switches, false, threads).loss.total;
    ++n;
  }
  return sum / n;
}

TrainResult train(Model<float> model, const Vocabulary& vocab, const TrainSplit& train_split,
                  const TrainSplit* val_split, const TrainConfig& cfg, TrainState state,
                  const TrainCallbacks& callbacks, int max_epochs_this_call) {
  cfg.validate();
  if (train_split.size() == 0) throw ValidationError("training split is empty");
  if (train_split.images.size() != train_split.reports.size()) throw ValidationError("reports and images differ in count");
  if (vocab.size() > model.config.vocab_size) throw ValidationError("tokenizer has more ids than the model vocabulary");

  auto params = model.parameters();
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->size(), 0.0f);
      state.v.emplace_back(p->size(), 0.0f);
    }
  }
  if (state.m.size() != params.size()) throw ValidationError("optimizer state does not match the model");
  const bool has_val = val_split && val_split->size() > 0;

  TrainResult res;
  const int stop = max_epochs_this_call < 0 ? cfg.epochs : std::min(cfg.epochs, state.epoch + max_epochs_this_call);
  for (int e = state.epoch; e < stop; ++e) {
    const double lr = cfg.lr_at(e);
    std::vector<std::size_t> order(train_split.size());
    std::iota(order.begin(), order.end(), 0);
    Engine rng(substream(cfg.seed, kOrderStream, static_cast<std::uint64_t>(e)));
    shuffle(order.begin(), order.end(), rng);

    double epoch_sum = 0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::span<const std::size_t> chunk(order.data() + b, std::min<std::size_t>(cfg.batch, order.size() - b));
      const auto items = make_items(train_split, chunk, vocab, model.config.max_tokens, &cfg.augment, cfg.seed, e);
      BatchResult<float> r;
      try {
        r = evaluate_batch<float>(model, items, cfg.switches, true, cfg.threads);
      } catch (const NumericalError& err) {
        std::ostringstream msg;
        msg << err.what() << " at epoch " << e + 1 << " step " << state.step + 1
            << "; batch ids: " << ids_of(train_split, chunk);
        log::write(log::Level::Error, msg.str());
        throw NumericalError(msg.str());
      }

      ++state.adam_t;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.adam_t));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.adam_t));
      const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto& w = params[p]->value;
        auto& m = state.m[p];
        auto& v = state.v[p];
        const auto& g = r.grads[p];
        for (std::size_t j = 0; j < w.size(); ++j) {
          m[j] = b1 * m[j] + (1.0f - b1) * g[j];
          v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
          const double mh = m[j] / c1, vh = v[j] / c2;
          w[j] -= static_cast<float>(lr * mh / (std::sqrt(vh) + cfg.eps));
        }
      }

      ++state.step;
      StepRecord rec{e + 1, state.step, r.loss, lr};
      res.log.push_back(rec);
      if (callbacks.on_step) callbacks.on_step(rec);
      epoch_sum += r.loss.total;
      ++batches;
    }

    EpochSummary sum;
    sum.epoch = e + 1;
    sum.lr = lr;
    sum.train_loss = epoch_sum / batches;
    sum.val_loss = has_val ? validation_loss(model, vocab, *val_split, cfg.batch, cfg.switches, cfg.threads)
                           : std::nan("");
    if (!has_val || sum.val_loss < state.best_val) {
      if (has_val) state.best_val = sum.val_loss;
      state.best_epoch = e + 1;
      state.best = snapshot(model);
      sum.improved = true;
    }
    state.epoch = e + 1;
    res.epochs.push_back(sum);
    log::info("epoch " + std::to_string(e + 1) + " train " + std::to_string(sum.train_loss) + " val " +
              std::to_string(sum.val_loss));
    if (callbacks.on_epoch) callbacks.on_epoch(sum, model, state);
  }

  res.last = model;
  res.best = model;
  if (!state.best.empty()) restore(res.best, state.best);
  res.state = std::move(state);
  return res;
}

}  // namespace mlg
