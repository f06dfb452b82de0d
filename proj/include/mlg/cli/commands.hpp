#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mlg/cli/run_config.hpp"

namespace mlg::cli {

// Profile, config file and overrides, applied in that order on top of the
// defaults. An empty config path falls back to $MLG_CONFIG when set.
struct ConfigArgs {
  std::string profile = "full";
  std::filesystem::path config;
  std::vector<std::string> overrides;  // "key=value"
};
RunConfig resolve_config(const ConfigArgs& args);

struct SynthArgs {
  std::filesystem::path out;
  int count = 100;
  std::uint64_t seed = 0;
  int size = 64;
  int min_shapes = 1;
  int max_shapes = 3;
};
// Writes the corpus files plus vocab.txt covering every generated word.
void cmd_synth(const SynthArgs& args, std::ostream& out);

struct TrainArgs {
  std::filesystem::path corpus;
  std::filesystem::path val;    // optional validation corpus directory
  std::filesystem::path vocab;  // default <corpus>/vocab.txt
  std::filesystem::path out;    // best-model checkpoint
  std::filesystem::path log;    // default <out>.log.jsonl
  std::filesystem::path resume; // <out>.resume from an earlier call
  int stop_after = -1;          // epochs to run in this call; < 0 runs to the end
  ConfigArgs config;
};
// Writes `out` (best model) and `<out>.resume` (last model with optimizer
// state) after every epoch. The log gets one JSON record per step and one per
// epoch.
void cmd_train(const TrainArgs& args, std::ostream& out);

struct LocateArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path image;
  std::string prompt;
  std::filesystem::path out;  // prefix: <out>.afh1, <out>_overlay.png, <out>_mask.png
  std::optional<double> threshold;
  std::string mode = "clamp";
};
void cmd_locate(const LocateArgs& args, std::ostream& out);

struct ClassifyArgs {
  std::filesystem::path checkpoint;
  std::vector<std::filesystem::path> inputs;  // PNG files or directories
  std::filesystem::path prompts;
  std::vector<std::string> pathologies;  // default: every pathology in the prompt file
  double temperature = 1.0;
};
// Tab-separated table: header, then one row per image. A directory holding
// corpus.jsonl contributes its images in corpus order, any other directory
// its *.png files sorted by name.
void cmd_classify(const ClassifyArgs& args, std::ostream& out);

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path corpus;
  std::filesystem::path annotations;  // default <corpus>/annotations.jsonl
  std::filesystem::path prompts;      // default: config key, then <corpus>/prompts.json
  std::string protocol = "multi-threshold";
  std::filesystem::path val;  // fixed protocol: validation corpus used to pick the threshold
  std::filesystem::path out;
  std::vector<std::string> pathologies;  // classification; default all prompt pathologies
  ConfigArgs config;
};
// Writes localization.{jsonl,txt} and, when the corpus has labels,
// classification.{jsonl,txt} into `out`.
void cmd_eval(const EvalArgs& args, std::ostream& out);

struct AblateArgs {
  std::filesystem::path train;  // synthetic training corpus directory
  std::filesystem::path val;    // optional
  std::filesystem::path eval;   // synthetic evaluation corpus directory
  std::filesystem::path vocab;  // default <train>/vocab.txt
  std::filesystem::path out;
  std::string mode = "levels";  // or "prompts"
  std::vector<std::uint64_t> seeds{0, 1, 2};
  ConfigArgs config;
};
// Trained models are cached in <out>/checkpoints keyed by (switches, seed)
// and the run settings, so "levels" and "prompts" share the all-level runs.
void cmd_ablate(const AblateArgs& args, std::ostream& out);

}  // namespace mlg::cli
