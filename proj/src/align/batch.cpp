#include "mlg/align/batch.hpp"

#include <cmath>
#include <memory>

#include "mlg/align/losses.hpp"
#include "mlg/error.hpp"
#include "mlg/kernels/kernels.hpp"
#include "mlg/parallel.hpp"

namespace mlg {

namespace {

// Norm floor for feature normalization during training; a ReLU map can leave a
// position with an all-zero feature.
template <typename T>
constexpr T kEps = T(1e-6);

template <typename T>
std::vector<T> copy_of(const ad::Tape<T>& tape, ad::Var v) {
  const auto s = tape.value(v);
  return {s.begin(), s.end()};
}

// Encoder outputs of one sample. Local features are L2-normalized here so the
// loss tapes only see unit rows; global features stay raw.
template <typename T>
struct Encoded {
  std::unique_ptr<ad::Tape<T>> tape;
  ad::Var t_w, t_s, t_r, v_s, v_d, v_g;
  int words = 0, sentences = 0;
};

template <typename T>
Encoded<T> encode_sample(const Model<T>& model, const TrainItem<T>& item, const LossSwitches& sw, bool record) {
  Encoded<T> e;
  e.tape = std::make_unique<ad::Tape<T>>(record);
  auto& tape = *e.tape;
  const auto& tok = item.tok;
  const std::span<const int> ids(tok.token_ids.data(), tok.valid_len);
  const auto layers = model.text.forward(tape, ids, tok.valid_len, 0);
  const auto h = aggregate_hierarchy<T>(tape, layers, tok, model.config.word_agg);
  if (sw.sw) e.t_w = tape.l2_normalize_rows(h.t_w, kEps<T>);
  if (sw.ds) e.t_s = tape.l2_normalize_rows(h.t_s, kEps<T>);
  e.t_r = h.t_r;
  e.words = tok.words();
  e.sentences = tok.sentences();

  const int side = model.config.image_side;
  const auto x = tape.constant(item.image, model.config.in_channels, side * side);
  const auto f = model.vision.forward(tape, x, model.vision_slot_base());
  const auto p = model.heads.forward(tape, f, model.head_slot_base());
  if (sw.sw) e.v_s = tape.l2_normalize_rows(p.v_s, kEps<T>);
  if (sw.ds) e.v_d = tape.l2_normalize_rows(p.v_d, kEps<T>);
  e.v_g = p.v_g;
  return e;
}

// Z scores of one image against every text in the batch, on its own tape so
// images can be processed independently.
template <typename T>
struct LevelRow {
  std::unique_ptr<ad::Tape<T>> tape;
  ad::Var v, items, z;
};

template <typename T>
LevelRow<T> level_row(const std::vector<T>& v, int positions, const std::vector<T>& items, int item_rows, int dim,
                      std::span<const int> offsets, T tau1, T tau2, bool record) {
  LevelRow<T> r;
  r.tape = std::make_unique<ad::Tape<T>>(record);
  r.v = r.tape->input(v, positions, dim);
  r.items = r.tape->input(items, item_rows, dim);
  r.z = local_match_scores<T>(*r.tape, r.v, r.items, offsets, tau1, tau2, kEps<T>);
  return r;
}

template <typename T>
struct Level {
  std::vector<LevelRow<T>> rows;
  std::vector<int> offsets;
  std::vector<std::vector<T>> d_image;  // per sample, grad w.r.t. its normalized local image features
  std::vector<std::vector<T>> d_text;   // per sample, grad w.r.t. its normalized text items
};

// Builds one LevelRow per image from the encoder outputs named by the member pointers.
template <typename T>
Level<T> run_level(std::vector<Encoded<T>>& enc, ad::Var Encoded<T>::*image, ad::Var Encoded<T>::*text, T tau1,
                   T tau2, bool record, int threads) {
  const int b = static_cast<int>(enc.size());
  Level<T> lv;
  lv.offsets.push_back(0);
  std::vector<T> items;
  int dim = 0;
  for (auto& e : enc) {
    const ad::Var t = e.*text;
    dim = e.tape->cols(t);
    const auto v = e.tape->value(t);
    items.insert(items.end(), v.begin(), v.end());
    lv.offsets.push_back(lv.offsets.back() + e.tape->rows(t));
  }
  lv.rows.resize(b);
  parallel_for(b, threads, [&](std::size_t i) {
    auto& e = enc[i];
    const ad::Var v = e.*image;
    lv.rows[i] = level_row<T>(copy_of(*e.tape, v), e.tape->rows(v), items, lv.offsets.back(), dim, lv.offsets, tau1,
                              tau2, record);
  });
  return lv;
}

template <typename T>
std::vector<T> score_matrix(const Level<T>& lv) {
  std::vector<T> z;
  for (const auto& r : lv.rows) {
    const auto s = r.tape->value(r.z);
    z.insert(z.end(), s.begin(), s.end());
  }
  return z;
}

template <typename T>
void backprop_level(Level<T>& lv, std::span<const T> dz, int threads) {
  const int b = static_cast<int>(lv.rows.size());
  std::vector<std::vector<T>> d_items(b);
  lv.d_image.assign(b, {});
  parallel_for(b, threads, [&](std::size_t i) {
    auto& r = lv.rows[i];
    const std::pair<ad::Var, std::vector<T>> seed{r.z, {dz.begin() + i * b, dz.begin() + (i + 1) * b}};
    r.tape->backward(std::span(&seed, 1));
    const auto gv = r.tape->grad(r.v);
    lv.d_image[i].assign(gv.begin(), gv.end());
    if (lv.d_image[i].empty()) lv.d_image[i].assign(r.tape->value(r.v).size(), T(0));
    const auto gi = r.tape->grad(r.items);
    d_items[i].assign(gi.begin(), gi.end());
  });
  // Text gradients gather contributions from every image, in image order.
  std::vector<T> total(lv.rows.empty() ? 0 : lv.rows[0].tape->value(lv.rows[0].items).size(), T(0));
  for (int i = 0; i < b; ++i)
    if (!d_items[i].empty()) kernels::axpy<T>(total.size(), T(1), d_items[i].data(), total.data());
  const std::size_t dim = lv.rows.empty() ? 0 : static_cast<std::size_t>(lv.rows[0].tape->cols(lv.rows[0].items));
  lv.d_text.assign(b, {});
  for (int k = 0; k < b; ++k)
    lv.d_text[k].assign(total.begin() + lv.offsets[k] * dim, total.begin() + lv.offsets[k + 1] * dim);
  for (auto& r : lv.rows) r.tape.reset();
}

void check_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + term + " loss");
}

}  // namespace

template <typename T>
BatchResult<T> evaluate_batch(const Model<T>& model, std::span<const TrainItem<T>> items, const LossSwitches& switches,
                              bool with_grads, int threads) {
  if (!switches.any()) throw ValidationError("at least one loss term must be enabled");
  if (items.empty()) throw ValidationError("empty batch");
  model.temps.validate();
  const int b = static_cast<int>(items.size());
  const T tau1 = static_cast<T>(model.temps.tau1), tau2 = static_cast<T>(model.temps.tau2);

  std::vector<Encoded<T>> enc(b);
  parallel_for(b, threads, [&](std::size_t i) { enc[i] = encode_sample(model, items[i], switches, with_grads); });

  Level<T> sw, ds;
  if (switches.sw) sw = run_level<T>(enc, &Encoded<T>::v_s, &Encoded<T>::t_w, tau1, tau2, with_grads, threads);
  if (switches.ds) ds = run_level<T>(enc, &Encoded<T>::v_d, &Encoded<T>::t_s, tau1, tau2, with_grads, threads);

  ad::Tape<T> main(with_grads);
  const int dim = model.config.dim;
  ad::Var zsw, zds, vg, tr;
  ad::Var total;
  BatchResult<T> res;
  auto accumulate = [&](ad::Var term) { total = total.valid() ? main.add(total, term) : term; };
  if (switches.sw) {
    zsw = main.input(score_matrix(sw), b, b);
    const ad::Var l = symmetric_infonce<T>(main, zsw, static_cast<T>(model.temps.sw()));
    res.loss.sw = main.scalar(l);
    check_finite(res.loss.sw, "word-level");
    accumulate(l);
  }
  if (switches.ds) {
    zds = main.input(score_matrix(ds), b, b);
    const ad::Var l = symmetric_infonce<T>(main, zds, static_cast<T>(model.temps.ds()));
    res.loss.ds = main.scalar(l);
    check_finite(res.loss.ds, "sentence-level");
    accumulate(l);
  }
  if (switches.gr) {
    std::vector<T> v, t;
    for (auto& e : enc) {
      const auto a = e.tape->value(e.v_g);
      const auto c = e.tape->value(e.t_r);
      v.insert(v.end(), a.begin(), a.end());
      t.insert(t.end(), c.begin(), c.end());
    }
    vg = main.input(std::move(v), b, dim);
    tr = main.input(std::move(t), b, dim);
    const ad::Var s = main.matmul_nt(main.l2_normalize_rows(vg, kEps<T>), main.l2_normalize_rows(tr, kEps<T>));
    const ad::Var l = symmetric_infonce<T>(main, s, static_cast<T>(model.temps.gr()));
    res.loss.gr = main.scalar(l);
    check_finite(res.loss.gr, "report-level");
    accumulate(l);
  }
  res.loss.total = main.scalar(total);
  if (!with_grads) return res;

  main.backward(total);
  if (switches.sw) backprop_level(sw, main.grad(zsw), threads);
  if (switches.ds) backprop_level(ds, main.grad(zds), threads);
  const auto gvg = switches.gr ? main.grad(vg) : std::span<const T>{};
  const auto gtr = switches.gr ? main.grad(tr) : std::span<const T>{};

  const auto params = model.parameters();
  std::vector<std::vector<std::vector<T>>> per_sample(b);
  parallel_for(b, threads, [&](std::size_t i) {
    auto& e = enc[i];
    std::vector<std::pair<ad::Var, std::vector<T>>> seeds;
    if (switches.sw) {
      seeds.emplace_back(e.v_s, std::move(sw.d_image[i]));
      seeds.emplace_back(e.t_w, std::move(sw.d_text[i]));
    }
    if (switches.ds) {
      seeds.emplace_back(e.v_d, std::move(ds.d_image[i]));
      seeds.emplace_back(e.t_s, std::move(ds.d_text[i]));
    }
    if (switches.gr) {
      seeds.emplace_back(e.v_g, std::vector<T>(gvg.begin() + i * dim, gvg.begin() + (i + 1) * dim));
      seeds.emplace_back(e.t_r, std::vector<T>(gtr.begin() + i * dim, gtr.begin() + (i + 1) * dim));
    }
    e.tape->backward(seeds);
    auto& g = per_sample[i];
    g.resize(params.size());
    e.tape->for_each_param_grad([&](int slot, std::span<const T> grad) {
      auto& dst = g[slot];
      if (dst.empty()) dst.assign(grad.size(), T(0));
      kernels::axpy<T>(grad.size(), T(1), grad.data(), dst.data());
    });
    e.tape.reset();
  });

  res.grads.resize(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    res.grads[p].assign(params[p]->size(), T(0));
    for (int i = 0; i < b; ++i)
      if (!per_sample[i][p].empty())
        kernels::axpy<T>(params[p]->size(), T(1), per_sample[i][p].data(), res.grads[p].data());
  }
  return res;
}

template BatchResult<float> evaluate_batch(const Model<float>&, std::span<const TrainItem<float>>, const LossSwitches&,
                                           bool, int);
template BatchResult<double> evaluate_batch(const Model<double>&, std::span<const TrainItem<double>>,
                                            const LossSwitches&, bool, int);

}  // namespace mlg
