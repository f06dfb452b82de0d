#include "mlg/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mlg/error.hpp"
#include "mlg/kernels/kernels.hpp"

namespace mlg {

namespace {

kernels::MaskCounts counts(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width) throw ValidationError("mask dimensions differ");
  return kernels::mask_counts(a.bits.size(), a.bits.data(), b.bits.data());
}

double mean_of(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double iou(const Mask& a, const Mask& b) {
  const auto c = counts(a, b);
  const auto uni = c.a + c.b - c.intersection;
  return uni == 0 ? 0.0 : static_cast<double>(c.intersection) / static_cast<double>(uni);
}

double dice(const Mask& a, const Mask& b) {
  const auto c = counts(a, b);
  const auto den = c.a + c.b;
  return den == 0 ? 0.0 : 2.0 * static_cast<double>(c.intersection) / static_cast<double>(den);
}

const std::vector<double>& default_thresholds() {
  static const std::vector<double> t{0.1, 0.2, 0.3, 0.4, 0.5};
  return t;
}

OverlapMeans multi_threshold_mean(const Heatmap& hm, const Mask& gt, std::span<const double> thresholds) {
  if (thresholds.empty()) throw ValidationError("threshold list is empty");
  if (hm.height != gt.height || hm.width != gt.width) throw ValidationError("heatmap and mask sizes differ");
  OverlapMeans m;
  for (double t : thresholds) {
    const Mask pred = binarize(hm, t);
    const auto c = counts(pred, gt);
    const auto uni = c.a + c.b - c.intersection;
    m.iou += uni == 0 ? 0.0 : static_cast<double>(c.intersection) / static_cast<double>(uni);
    m.dice += c.a + c.b == 0 ? 0.0 : 2.0 * static_cast<double>(c.intersection) / static_cast<double>(c.a + c.b);
  }
  m.iou /= static_cast<double>(thresholds.size());
  m.dice /= static_cast<double>(thresholds.size());
  return m;
}

double cnr(const Heatmap& hm, const Mask& gt) {
  if (hm.height != gt.height || hm.width != gt.width) throw ValidationError("heatmap and mask sizes differ");
  double s_in = 0, s_out = 0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < hm.values.size(); ++i) {
    if (gt.bits[i]) {
      s_in += hm.values[i];
      ++n_in;
    } else {
      s_out += hm.values[i];
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0) throw ValidationError("CNR needs pixels both inside and outside the region");
  const double mu_in = s_in / n_in, mu_out = s_out / n_out;
  double v_in = 0, v_out = 0;
  for (std::size_t i = 0; i < hm.values.size(); ++i) {
    const double d = hm.values[i] - (gt.bits[i] ? mu_in : mu_out);
    (gt.bits[i] ? v_in : v_out) += d * d;
  }
  v_in /= n_in;
  v_out /= n_out;
  const double num = mu_in - mu_out;
  const double den = std::sqrt((v_in + v_out) / 2.0);
  if (std::abs(num) < 1e-12 && std::abs(den) < 1e-12) return 0.0;
  return num / den;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]]) {
        pos_rank_sum += mid;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("AUROC needs both positive and negative labels");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1) / 2.0) / (np * nn);
}

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("percentile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_statistic(double point, int reps, std::uint64_t seed,
                             const std::function<double(Engine&)>& replicate) {
  if (reps < 1) throw ValidationError("bootstrap needs at least one replicate");
  std::vector<double> stats(reps);
  for (int r = 0; r < reps; ++r) {
    Engine rng(substream(seed, static_cast<std::uint64_t>(r)));
    stats[r] = replicate(rng);
  }
  std::sort(stats.begin(), stats.end());
  return {point, percentile_sorted(stats, 0.025), percentile_sorted(stats, 0.975)};
}

Interval bootstrap_ci(std::span<const double> values, int reps, std::uint64_t seed) {
  if (values.empty()) throw ValidationError("bootstrap of an empty sample");
  const std::size_t n = values.size();
  return bootstrap_statistic(mean_of(values), reps, seed, [&](Engine& rng) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += values[uniform_index(rng, n)];
    return s / static_cast<double>(n);
  });
}

Interval bootstrap_auroc(std::span<const double> scores, std::span<const int> labels, int reps, std::uint64_t seed) {
  const double point = auroc(scores, labels);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(scores[i]);
  std::vector<double> s(scores.size());
  std::vector<int> l(scores.size());
  std::fill(l.begin(), l.begin() + static_cast<std::ptrdiff_t>(pos.size()), 1);
  return bootstrap_statistic(point, reps, seed, [&](Engine& rng) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) s[k++] = pos[uniform_index(rng, pos.size())];
    for (std::size_t i = 0; i < neg.size(); ++i) s[k++] = neg[uniform_index(rng, neg.size())];
    return auroc(s, l);
  });
}

Interval bootstrap_macro_mean(const std::vector<std::vector<double>>& groups, int reps, std::uint64_t seed) {
  if (groups.empty()) throw ValidationError("macro mean of no groups");
  double point = 0;
  for (const auto& g : groups) {
    if (g.empty()) throw ValidationError("macro mean with an empty group");
    point += mean_of(g);
  }
  point /= static_cast<double>(groups.size());
  return bootstrap_statistic(point, reps, seed, [&](Engine& rng) {
    double total = 0;
    for (const auto& g : groups) {
      double s = 0;
      for (std::size_t i = 0; i < g.size(); ++i) s += g[uniform_index(rng, g.size())];
      total += s / static_cast<double>(g.size());
    }
    return total / static_cast<double>(groups.size());
  });
}

double optimal_threshold(std::span<const Heatmap* const> heatmaps, std::span<const Mask* const> masks,
                         std::span<const double> grid) {
  if (heatmaps.empty() || heatmaps.size() != masks.size()) throw ValidationError("validation set is empty or ragged");
  if (grid.empty()) throw ValidationError("threshold grid is empty");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  double best_t = sorted.front(), best = -1;
  for (double t : sorted) {
    double s = 0;
    for (std::size_t i = 0; i < heatmaps.size(); ++i) s += iou(binarize(*heatmaps[i], t), *masks[i]);
    s /= static_cast<double>(heatmaps.size());
    if (s > best) {
      best = s;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace mlg
