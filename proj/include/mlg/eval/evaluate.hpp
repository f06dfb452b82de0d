#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mlg/data/annotations.hpp"
#include "mlg/data/corpus.hpp"
#include "mlg/data/prompts.hpp"
#include "mlg/eval/metrics.hpp"
#include "mlg/eval/report.hpp"
#include "mlg/infer/inference.hpp"

namespace mlg {

struct LocalizationProtocol {
  enum class Kind { MultiThreshold, Fixed };
  Kind kind = Kind::MultiThreshold;
  std::vector<double> thresholds = default_thresholds();
  double theta = 0.3;  // used by Kind::Fixed
  int reps = 1000;
  std::uint64_t seed = 0;
};

// One annotated-positive (image, pathology) pair with its heatmap.
struct LocalizedSample {
  std::string id;
  std::string pathology;
  Heatmap heatmap;
  const Mask* gt = nullptr;
};

struct LocalizationScore {
  std::string id;
  std::string pathology;
  double iou = 0;
  double dice = 0;
  double cnr = 0;
};

// Prompt texts used as the query for (id, pathology); several texts are
// averaged into one query.
using PromptFn = std::function<std::vector<std::string>(const std::string& id, const std::string& pathology)>;

// The positive templates of `prompts`.
PromptFn positive_prompts(const PromptSet& prompts);

// Heatmaps for every non-empty annotation whose id is in the corpus, sorted by
// (pathology, id). Images are encoded once each, in parallel.
std::vector<LocalizedSample> localize_annotated(const InferenceModel& im, const Corpus& corpus, const MaskMap& masks,
                                                const PromptFn& prompt_for, int threads = 1);

std::vector<LocalizationScore> score_localization(const std::vector<LocalizedSample>& samples,
                                                  const LocalizationProtocol& protocol);

// Per-pathology IoU/Dice/CNR rows plus "Mean" macro rows, each with a
// bootstrap CI. Input order does not matter.
MetricReport summarize_localization(std::vector<LocalizationScore> scores, const LocalizationProtocol& protocol);

// localize_annotated + score + summarize. Pathologies in `prompts` with no
// positive sample are skipped with a warning.
MetricReport evaluate_localization(const InferenceModel& im, const Corpus& corpus, const MaskMap& masks,
                                   const PromptSet& prompts, const LocalizationProtocol& protocol, int threads = 1);

// Threshold maximizing mean IoU over a validation corpus.
double select_threshold(const InferenceModel& im, const Corpus& corpus, const MaskMap& masks, const PromptSet& prompts,
                        std::span<const double> grid, int threads = 1);

struct ClassificationScore {
  std::string id;
  std::string pathology;
  double probability = 0;
  int label = 0;
};

// Positive probability for every (report with labels, pathology) pair.
std::vector<ClassificationScore> classify_corpus(const InferenceModel& im, const Corpus& corpus,
                                                 const PromptSet& prompts, const std::vector<std::string>& pathologies,
                                                 int threads = 1);

// AUROC per pathology plus a "Mean" macro row; single-class pathologies are
// skipped with a warning.
MetricReport summarize_classification(std::vector<ClassificationScore> scores, int reps = 1000,
                                      std::uint64_t seed = 0);

MetricReport evaluate_classification(const InferenceModel& im, const Corpus& corpus, const PromptSet& prompts,
                                     const std::vector<std::string>& pathologies, int reps = 1000,
                                     std::uint64_t seed = 0, int threads = 1);

}  // namespace mlg
