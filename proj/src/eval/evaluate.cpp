#include "mlg/eval/evaluate.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "mlg/error.hpp"
#include "mlg/log.hpp"
#include "mlg/parallel.hpp"

namespace mlg {

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += x + '\x1f';
  return s;
}

// Bootstrap streams per (pathology, metric) so rows do not depend on which
// other rows exist.
std::uint64_t row_seed(std::uint64_t seed, const std::string& pathology, const std::string& metric) {
  const std::string key = pathology + '\x1f' + metric;
  return substream(seed, fnv1a(key.data(), key.size()));
}

}  // namespace

PromptFn positive_prompts(const PromptSet& prompts) {
  return [&prompts](const std::string&, const std::string& pathology) { return prompts.at(pathology).positive; };
}

std::vector<LocalizedSample> localize_annotated(const InferenceModel& im, const Corpus& corpus, const MaskMap& masks,
                                                const PromptFn& prompt_for, int threads) {
  // Group annotation keys by image so each image is encoded once.
  std::map<std::string, std::vector<std::pair<std::string, const Mask*>>> by_id;
  for (const auto& [key, mask] : masks) {
    if (mask.count() == 0) continue;
    if (!corpus.find(key.first)) continue;
    by_id[key.first].emplace_back(key.second, &mask);
  }
  std::map<std::string, std::vector<float>> queries;
  std::vector<std::string> ids;
  for (const auto& [id, list] : by_id) {
    ids.push_back(id);
    for (const auto& [pathology, mask] : list) {
      const auto texts = prompt_for(id, pathology);
      if (texts.empty()) throw ValidationError("no prompt for pathology '" + pathology + "'");
      const std::string k = join(texts);
      if (queries.count(k)) continue;
      std::vector<double> acc(im.model.config.dim, 0.0);
      for (const auto& t : texts) {
        const auto q = im.prompt_query(t);
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += q[j];
      }
      std::vector<float> q(acc.size());
      for (std::size_t j = 0; j < q.size(); ++j) q[j] = static_cast<float>(acc[j] / texts.size());
      queries.emplace(k, std::move(q));
    }
  }

  std::vector<std::vector<LocalizedSample>> per_image(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    const Report& r = *corpus.find(ids[i]);
    const Image img = read_png(corpus.image_path(r));
    const auto pyr = im.encode_image(img);
    for (const auto& [pathology, mask] : by_id.at(ids[i])) {
      if (mask->height != img.height || mask->width != img.width)
        throw ValidationError("mask for '" + ids[i] + "' does not match the image size");
      const auto texts = prompt_for(ids[i], pathology);
      LocalizedSample s;
      s.id = ids[i];
      s.pathology = pathology;
      s.heatmap = heatmap_from_features(pyr.v_d, pyr.grid / 2, queries.at(join(texts)), img.height, img.width, im.mode);
      s.heatmap.image_id = ids[i];
      s.heatmap.prompt = texts.front();
      s.gt = mask;
      per_image[i].push_back(std::move(s));
    }
  });
  std::vector<LocalizedSample> out;
  for (auto& v : per_image)
    for (auto& s : v) out.push_back(std::move(s));
  std::sort(out.begin(), out.end(), [](const LocalizedSample& a, const LocalizedSample& b) {
    return std::tie(a.pathology, a.id) < std::tie(b.pathology, b.id);
  });
  return out;
}

std::vector<LocalizationScore> score_localization(const std::vector<LocalizedSample>& samples,
                                                  const LocalizationProtocol& protocol) {
  std::vector<LocalizationScore> out;
  out.reserve(samples.size());
  const std::vector<double> fixed{protocol.theta};
  const auto& thresholds = protocol.kind == LocalizationProtocol::Kind::Fixed ? fixed : protocol.thresholds;
  for (const auto& s : samples) {
    const auto m = multi_threshold_mean(s.heatmap, *s.gt, thresholds);
    out.push_back({s.id, s.pathology, m.iou, m.dice, cnr(s.heatmap, *s.gt)});
  }
  return out;
}

MetricReport summarize_localization(std::vector<LocalizationScore> scores, const LocalizationProtocol& protocol) {
  std::sort(scores.begin(), scores.end(), [](const LocalizationScore& a, const LocalizationScore& b) {
    return std::tie(a.pathology, a.id) < std::tie(b.pathology, b.id);
  });
  std::map<std::string, std::vector<const LocalizationScore*>> groups;
  for (const auto& s : scores) groups[s.pathology].push_back(&s);

  MetricReport rep;
  const std::pair<const char*, double LocalizationScore::*> metrics[] = {
      {"IoU", &LocalizationScore::iou}, {"Dice", &LocalizationScore::dice}, {"CNR", &LocalizationScore::cnr}};
  std::map<std::string, std::vector<std::vector<double>>> macro;
  for (const auto& [pathology, list] : groups) {
    for (const auto& [name, field] : metrics) {
      std::vector<double> v;
      for (const auto* s : list) v.push_back(s->*field);
      const auto ci = bootstrap_ci(v, protocol.reps, row_seed(protocol.seed, pathology, name));
      rep.rows.push_back({pathology, name, ci.mean, ci.lo, ci.hi, v.size()});
      macro[name].push_back(std::move(v));
    }
  }
  if (!groups.empty()) {
    for (const auto& [name, field] : metrics) {
      const auto& g = macro[name];
      std::size_t n = 0;
      for (const auto& v : g) n += v.size();
      const auto ci = bootstrap_macro_mean(g, protocol.reps, row_seed(protocol.seed, "Mean", name));
      rep.rows.push_back({"Mean", name, ci.mean, ci.lo, ci.hi, n});
    }
  }
  return rep;
}

MetricReport evaluate_localization(const InferenceModel& im, const Corpus& corpus, const MaskMap& masks,
                                   const PromptSet& prompts, const LocalizationProtocol& protocol, int threads) {
  const auto samples = localize_annotated(im, corpus, masks, positive_prompts(prompts), threads);
  std::set<std::string> seen;
  for (const auto& s : samples) seen.insert(s.pathology);
  for (const auto& name : prompts.names())
    if (!seen.count(name)) log::warn_once("no positive localization samples for '" + name + "'; skipped");
  return summarize_localization(score_localization(samples, protocol), protocol);
}

double select_threshold(const InferenceModel& im, const Corpus& corpus, const MaskMap& masks, const PromptSet& prompts,
                        std::span<const double> grid, int threads) {
  const auto samples = localize_annotated(im, corpus, masks, positive_prompts(prompts), threads);
  std::vector<const Heatmap*> hms;
  std::vector<const Mask*> gts;
  for (const auto& s : samples) {
    hms.push_back(&s.heatmap);
    gts.push_back(s.gt);
  }
  return optimal_threshold(hms, gts, grid);
}

std::vector<ClassificationScore> classify_corpus(const InferenceModel& im, const Corpus& corpus,
                                                 const PromptSet& prompts, const std::vector<std::string>& pathologies,
                                                 int threads) {
  std::map<std::string, ClassPrompt> cps;
  for (const auto& p : pathologies) cps.emplace(p, class_prompt(p, prompts, im));
  std::vector<const Report*> reports;
  for (const auto& r : corpus.reports)
    if (r.labels) reports.push_back(&r);
  std::vector<std::vector<ClassificationScore>> per(reports.size());
  parallel_for(reports.size(), threads, [&](std::size_t i) {
    const Report& r = *reports[i];
    const auto pyr = im.encode_image(read_png(corpus.image_path(r)));
    for (const auto& p : pathologies) {
      auto it = r.labels->find(p);
      if (it == r.labels->end()) continue;
      per[i].push_back({r.id, p, classify_features(pyr.v_g, cps.at(p), im.cls_temperature), it->second});
    }
  });
  std::vector<ClassificationScore> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

MetricReport summarize_classification(std::vector<ClassificationScore> scores, int reps, std::uint64_t seed) {
  std::sort(scores.begin(), scores.end(), [](const ClassificationScore& a, const ClassificationScore& b) {
    return std::tie(a.pathology, a.id) < std::tie(b.pathology, b.id);
  });
  std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> groups;
  for (const auto& s : scores) {
    groups[s.pathology].first.push_back(s.probability);
    groups[s.pathology].second.push_back(s.label);
  }
  MetricReport rep;
  std::vector<const std::pair<std::vector<double>, std::vector<int>>*> kept;
  std::size_t n_total = 0;
  for (const auto& [pathology, g] : groups) {
    const auto pos = std::count(g.second.begin(), g.second.end(), 1);
    if (pos == 0 || pos == static_cast<long>(g.second.size())) {
      log::warn("pathology '" + pathology + "' has a single class; AUROC skipped");
      continue;
    }
    const auto ci = bootstrap_auroc(g.first, g.second, reps, row_seed(seed, pathology, "AUROC"));
    rep.rows.push_back({pathology, "AUROC", ci.mean, ci.lo, ci.hi, g.first.size()});
    kept.push_back(&g);
    n_total += g.first.size();
  }
  if (!kept.empty()) {
    double point = 0;
    for (const auto& row : rep.rows) point += row.point;
    point /= static_cast<double>(kept.size());
    // Stratified per pathology and per class.
    const auto ci = bootstrap_statistic(point, reps, row_seed(seed, "Mean", "AUROC"), [&](Engine& rng) {
      double total = 0;
      for (const auto* g : kept) {
        std::vector<double> pos, neg;
        for (std::size_t i = 0; i < g->first.size(); ++i) (g->second[i] ? pos : neg).push_back(g->first[i]);
        std::vector<double> s;
        std::vector<int> l;
        for (std::size_t i = 0; i < pos.size(); ++i) {
          s.push_back(pos[uniform_index(rng, pos.size())]);
          l.push_back(1);
        }
        for (std::size_t i = 0; i < neg.size(); ++i) {
          s.push_back(neg[uniform_index(rng, neg.size())]);
          l.push_back(0);
        }
        total += auroc(s, l);
      }
      return total / static_cast<double>(kept.size());
    });
    rep.rows.push_back({"Mean", "AUROC", ci.mean, ci.lo, ci.hi, n_total});
  }
  return rep;
}

MetricReport evaluate_classification(const InferenceModel& im, const Corpus& corpus, const PromptSet& prompts,
                                     const std::vector<std::string>& pathologies, int reps, std::uint64_t seed,
                                     int threads) {
  if (pathologies.empty()) throw ValidationError("pathology list is empty");
  return summarize_classification(classify_corpus(im, corpus, prompts, pathologies, threads), reps, seed);
}

}  // namespace mlg
