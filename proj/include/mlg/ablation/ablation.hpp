#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlg/align/trainer.hpp"
#include "mlg/eval/evaluate.hpp"
#include "mlg/infer/inference.hpp"

namespace mlg {

// The seven non-empty {SW, DS, GR} combinations, single terms first and the
// all-level variant last.
std::vector<LossSwitches> all_switch_combinations();

struct AblationPlan {
  TrainConfig base;  // switches and seed are overridden per run
  std::vector<LossSwitches> variants = all_switch_combinations();
  std::vector<std::uint64_t> seeds{0, 1, 2};

  // All seven combinations exactly once, at least two distinct seeds.
  void validate() const;
};

// Data and evaluation settings shared by every run of a plan.
struct AblationAssets {
  ModelConfig model;  // vocab_size must match `vocab`
  Temperatures temps;
  Vocabulary vocab;
  NormStats stats;
  TrainSplit train;
  std::optional<TrainSplit> val;
  Corpus eval;
  MaskMap masks;
  PromptSet prompts;
  LocalizationProtocol protocol;
  HeatmapMode mode = HeatmapMode::Clamp;
  int threads = 1;
};

// Trained models keyed by everything that determines them. With a directory,
// models are also stored there as checkpoints and reused across processes.
class CheckpointCache {
 public:
  explicit CheckpointCache(std::filesystem::path dir = {}) : dir_(std::move(dir)) {}

  Model<float> get_or_train(const AblationAssets& assets, const TrainConfig& base, const LossSwitches& switches,
                            std::uint64_t seed);
  std::size_t trained() const { return trained_; }

 private:
  std::filesystem::path dir_;
  std::map<std::uint64_t, Model<float>> memory_;
  std::size_t trained_ = 0;
};

// Identity of one run: model, temperatures, tokenizer, training settings and
// training report ids.
std::uint64_t run_key(const AblationAssets& assets, const TrainConfig& base, const LossSwitches& switches,
                      std::uint64_t seed);

// Model trained for one (switches, seed), as run_ablation trains it.
Model<float> train_variant(const AblationAssets& assets, const TrainConfig& base, const LossSwitches& switches,
                           std::uint64_t seed);

struct AblationCell {
  std::uint64_t seed = 0;
  double iou = 0;   // macro mean over pathologies
  double dice = 0;
  double cnr = 0;
  std::uint64_t checksum = 0;  // model_checksum of the evaluated model
};

struct AblationRow {
  LossSwitches switches;
  std::vector<AblationCell> cells;  // plan seed order
  double mean_iou = 0;
  double mean_dice = 0;
  double mean_cnr = 0;
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;  // plan variant order

  const AblationRow* find(const LossSwitches& s) const;
  // Checkbox columns SW/DS/GR, per-seed mean IoU, seed means of IoU, Dice and
  // CNR; the all-level row is marked.
  std::string render() const;
};

// Macro-mean localization metrics of one model on the assets' eval corpus.
AblationCell evaluate_variant(const Model<float>& model, const AblationAssets& assets, std::uint64_t seed);

AblationTable run_ablation(const AblationPlan& plan, const AblationAssets& assets, CheckpointCache& cache);

// Localization of one model under two prompt modes with the same protocol.
struct PromptComparison {
  MetricReport simple;
  MetricReport precise;
  // Rows Simple/Precise, columns IoU, Dice and CNR as "value (lo, hi)".
  std::string render() const;
};

PromptComparison run_prompt_comparison(const InferenceModel& im, const Corpus& corpus, const MaskMap& masks,
                                       const PromptFn& simple, const PromptFn& precise,
                                       const LocalizationProtocol& protocol, int threads = 1);

// simple_prompt(pathology) for every sample.
PromptFn simple_prompts();
// Per-(id, pathology) caption; ValidationError when one is missing.
PromptFn caption_prompts(const std::map<std::pair<std::string, std::string>, std::string>& captions);

}  // namespace mlg
