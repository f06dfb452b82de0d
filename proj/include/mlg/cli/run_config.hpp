#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mlg/align/model.hpp"
#include "mlg/align/trainer.hpp"
#include "mlg/eval/evaluate.hpp"
#include "mlg/infer/inference.hpp"

namespace mlg {

// Every tunable of a run. Text form is flat "key = value" lines; '#' starts a
// comment. Values are layered: defaults, then a profile, then a config file,
// then individual overrides, each replacing what came before.
struct RunConfig {
  ModelConfig model;  // vocab_size comes from the tokenizer, not from here
  Temperatures temps;
  TrainConfig train;
  std::vector<double> thresholds = default_thresholds();
  double theta = 0.3;
  int bootstrap_reps = 1000;
  HeatmapMode heatmap_mode = HeatmapMode::Clamp;
  double cls_temperature = 1.0;
  std::string prompts;  // prompt file; empty means <corpus>/prompts.json

  struct Key {
    std::string name;
    std::string doc;
  };
  static const std::vector<Key>& keys();

  // Throws ValidationError naming the key for unknown keys and bad values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  // "full" leaves the defaults alone; "toy" is the small synthetic setup.
  void apply_profile(const std::string& name);

  // ParseError carries the line number; unknown keys name the key.
  void apply_text(const std::string& text);
  void apply_file(const std::filesystem::path& path);

  // All keys, one "key = value" line each, in keys() order.
  std::string format() const;

  void validate() const;
};

// Environment variable naming a config file applied after the profile.
inline constexpr const char* kConfigEnv = "MLG_CONFIG";

}  // namespace mlg
