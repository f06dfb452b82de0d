#include "mlg/ablation/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "mlg/cli/checkpoint.hpp"
#include "mlg/data/synth.hpp"
#include "mlg/error.hpp"
#include "mlg/log.hpp"
#include "mlg/rng.hpp"

namespace mlg {

namespace {

double mean_row(const MetricReport& rep, const std::string& metric) {
  const MetricRow* r = rep.find("Mean", metric);
  if (!r) throw ValidationError("no localization samples to evaluate");
  return r->point;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::vector<LossSwitches> all_switch_combinations() {
  return {{true, false, false}, {false, true, false}, {false, false, true}, {true, true, false},
          {true, false, true},  {false, true, true},  {true, true, true}};
}

void AblationPlan::validate() const {
  base.validate();
  const auto all = all_switch_combinations();
  if (variants.size() != all.size()) throw ValidationError("ablation plan needs exactly the seven switch combinations");
  for (const auto& s : all)
    if (std::count(variants.begin(), variants.end(), s) != 1)
      throw ValidationError("ablation plan lacks variant " + s.label());
  const std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
  if (distinct.size() < 2 || distinct.size() != seeds.size())
    throw ValidationError("ablation plan needs at least two distinct seeds");
}

std::uint64_t run_key(const AblationAssets& assets, const TrainConfig& base, const LossSwitches& switches,
                      std::uint64_t seed) {
  ModelConfig mc = assets.model;
  std::ostringstream o;
  o.precision(17);
  o << mc.describe() << '|' << assets.temps.tau1 << ',' << assets.temps.tau2 << ',' << assets.temps.sw() << ','
    << assets.temps.ds() << ',' << assets.temps.gr() << '|' << assets.vocab.hash() << '|' << base.batch << ','
    << base.lr << ',' << base.beta1 << ',' << base.beta2 << ',' << base.eps << ',' << base.lr_decay << ','
    << base.epochs << ',' << base.augment.shuffle << ',' << base.augment.keep_ratio << '|' << switches.label() << '|'
    << seed << '|';
  for (int c = 0; c < 3; ++c) o << assets.stats.mean[c] << ',' << assets.stats.std[c] << ',';
  for (const auto& r : assets.train.reports) o << r.id << ',';
  o << '|';
  if (assets.val)
    for (const auto& r : assets.val->reports) o << r.id << ',';
  const std::string s = o.str();
  return fnv1a(s.data(), s.size());
}

Model<float> train_variant(const AblationAssets& assets, const TrainConfig& base, const LossSwitches& switches,
                           std::uint64_t seed) {
  TrainConfig cfg = base;
  cfg.switches = switches;
  cfg.seed = seed;
  cfg.threads = assets.threads;
  Model<float> model(assets.model);
  model.temps = assets.temps;
  model.init(seed);
  return train(std::move(model), assets.vocab, assets.train, assets.val ? &*assets.val : nullptr, cfg).best;
}

Model<float> CheckpointCache::get_or_train(const AblationAssets& assets, const TrainConfig& base,
                                           const LossSwitches& switches, std::uint64_t seed) {
  const auto key = run_key(assets, base, switches, seed);
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  std::filesystem::path file;
  if (!dir_.empty()) {
    file = dir_ / (switches.label() + "_seed" + std::to_string(seed) + "_" + hex(key) + ".ckpt");
    if (std::filesystem::exists(file)) {
      auto ck = load_checkpoint(file);
      if (ck.model.config.fingerprint() != assets.model.fingerprint())
        throw ValidationError("cached checkpoint " + file.string() + " has a different architecture");
      memory_.emplace(key, ck.model);
      return ck.model;
    }
  }
  log::info("training " + switches.label() + " seed " + std::to_string(seed));
  Model<float> m = train_variant(assets, base, switches, seed);
  ++trained_;
  if (!file.empty()) save_checkpoint(file, Checkpoint{m, assets.vocab, assets.stats, std::nullopt, {}});
  memory_.emplace(key, m);
  return m;
}

AblationCell evaluate_variant(const Model<float>& model, const AblationAssets& assets, std::uint64_t seed) {
  InferenceModel im{model, assets.vocab, assets.stats, assets.mode};
  const auto rep = evaluate_localization(im, assets.eval, assets.masks, assets.prompts, assets.protocol, assets.threads);
  return {seed, mean_row(rep, "IoU"), mean_row(rep, "Dice"), mean_row(rep, "CNR"), model_checksum(model)};
}

AblationTable run_ablation(const AblationPlan& plan, const AblationAssets& assets, CheckpointCache& cache) {
  plan.validate();
  AblationTable table;
  table.seeds = plan.seeds;
  for (const auto& sw : plan.variants) {
    AblationRow row;
    row.switches = sw;
    for (auto seed : plan.seeds) {
      const auto model = cache.get_or_train(assets, plan.base, sw, seed);
      row.cells.push_back(evaluate_variant(model, assets, seed));
    }
    for (const auto& c : row.cells) {
      row.mean_iou += c.iou;
      row.mean_dice += c.dice;
      row.mean_cnr += c.cnr;
    }
    const double n = static_cast<double>(row.cells.size());
    row.mean_iou /= n;
    row.mean_dice /= n;
    row.mean_cnr /= n;
    table.rows.push_back(std::move(row));
  }
  return table;
}

const AblationRow* AblationTable::find(const LossSwitches& s) const {
  for (const auto& r : rows)
    if (r.switches == s) return &r;
  return nullptr;
}

std::string AblationTable::render() const {
  std::ostringstream o;
  char buf[64];
  o << " SW   DS   GR  |";
  for (auto s : seeds) {
    std::snprintf(buf, sizeof(buf), " %9s |", ("seed " + std::to_string(s)).c_str());
    o << buf;
  }
  o << "  Mean IoU | Mean Dice |  Mean CNR\n";
  o << std::string(15, '-') << '+';
  for (std::size_t i = 0; i < seeds.size(); ++i) o << std::string(11, '-') << '+';
  o << std::string(11, '-') << '+' << std::string(11, '-') << '+' << std::string(10, '-') << '\n';
  for (const auto& r : rows) {
    o << (r.switches.sw ? " [x]" : " [ ]") << (r.switches.ds ? "  [x]" : "  [ ]") << (r.switches.gr ? "  [x] |" : "  [ ] |");
    for (const auto& c : r.cells) {
      std::snprintf(buf, sizeof(buf), " %9.3f |", c.iou);
      o << buf;
    }
    std::snprintf(buf, sizeof(buf), " %9.3f | %9.3f | %9.3f", r.mean_iou, r.mean_dice, r.mean_cnr);
    o << buf;
    if (r.switches == LossSwitches{true, true, true}) o << "  (all levels)";
    o << '\n';
  }
  return o.str();
}

PromptComparison run_prompt_comparison(const InferenceModel& im, const Corpus& corpus, const MaskMap& masks,
                                       const PromptFn& simple, const PromptFn& precise,
                                       const LocalizationProtocol& protocol, int threads) {
  PromptComparison out;
  out.simple = summarize_localization(
      score_localization(localize_annotated(im, corpus, masks, simple, threads), protocol), protocol);
  out.precise = summarize_localization(
      score_localization(localize_annotated(im, corpus, masks, precise, threads), protocol), protocol);
  return out;
}

std::string PromptComparison::render() const {
  std::ostringstream o;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s | %-22s | %-22s | %-22s\n", "Prompt", "IoU", "Dice", "CNR");
  o << buf << std::string(8, '-') << "-+-" << std::string(22, '-') << "-+-" << std::string(22, '-') << "-+-"
    << std::string(22, '-') << '\n';
  for (const auto& [name, rep] : {std::pair<const char*, const MetricReport*>{"Simple", &simple}, {"Precise", &precise}}) {
    std::string cells[3];
    const char* metrics[3] = {"IoU", "Dice", "CNR"};
    for (int i = 0; i < 3; ++i) {
      const MetricRow* r = rep->find("Mean", metrics[i]);
      cells[i] = r ? format_ci(r->point, r->lo, r->hi) : "n/a";
    }
    std::snprintf(buf, sizeof(buf), "%-8s | %-22s | %-22s | %-22s\n", name, cells[0].c_str(), cells[1].c_str(),
                  cells[2].c_str());
    o << buf;
  }
  return o.str();
}

PromptFn simple_prompts() {
  return [](const std::string&, const std::string& pathology) { return std::vector<std::string>{simple_prompt(pathology)}; };
}

PromptFn caption_prompts(const std::map<std::pair<std::string, std::string>, std::string>& captions) {
  return [captions](const std::string& id, const std::string& pathology) {
    auto it = captions.find({id, pathology});
    if (it == captions.end()) throw ValidationError("no caption for (" + id + ", " + pathology + ")");
    return std::vector<std::string>{it->second};
  };
}

}  // namespace mlg
