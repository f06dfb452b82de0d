#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mlg/align/model.hpp"
#include "mlg/data/image.hpp"
#include "mlg/data/prompts.hpp"
#include "mlg/text/tokenizer.hpp"
#include "mlg/vision/preprocess.hpp"
#include "mlg/vision/projection.hpp"

namespace mlg {

struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<float> values;  // row-major
  std::string prompt;
  std::string image_id;

  float at(int y, int x) const { return values[std::size_t(y) * width + x]; }
};

// Clamp keeps cosine values (clamped to [-1, 1]); MinMax rescales each map to
// span [-1, 1].
enum class HeatmapMode { Clamp, MinMax };
HeatmapMode parse_heatmap_mode(const std::string& s);
std::string to_string(HeatmapMode m);

// A trained model together with the tokenizer and image statistics it was
// trained with.
struct InferenceModel {
  Model<float> model;
  Vocabulary vocab;
  NormStats stats;
  HeatmapMode mode = HeatmapMode::Clamp;
  double cls_temperature = 1.0;

  ImagePyramid<float> encode_image(const Image& image) const;
  // Mean of the L2-normalized sentence features of `prompt`.
  std::vector<float> prompt_query(const std::string& prompt) const;
  // Report-level feature of `text`.
  std::vector<float> report_feature(const std::string& text) const;
};

// Cosine of `query` with every deep position (v_d rows, deep_grid² of them),
// bilinearly upsampled to height×width, then clamped or min-max rescaled.
Heatmap heatmap_from_features(const Matrix<float>& v_d, int deep_grid, std::span<const float> query, int height,
                              int width, HeatmapMode mode);

// Heatmap at the image's own resolution. Throws ValidationError when the
// prompt has no words.
Heatmap localize(const Image& image, const std::string& prompt, const InferenceModel& im);

// values >= theta.
Mask binarize(const Heatmap& hm, double theta);

// Positive probability of a two-way softmax over [sim_pos, sim_neg] / temperature.
double classify_scores(double sim_pos, double sim_neg, double temperature);

// Mean report-level features of a pathology's positive and negative templates.
struct ClassPrompt {
  std::vector<float> positive;
  std::vector<float> negative;
};
ClassPrompt class_prompt(const std::string& pathology, const PromptSet& prompts, const InferenceModel& im);
double classify_features(std::span<const float> v_g, const ClassPrompt& prompt, double temperature);

double classify(const Image& image, const std::string& pathology, const PromptSet& prompts, const InferenceModel& im);
// Each pathology scored independently.
std::map<std::string, double> classify_all(const Image& image, const std::vector<std::string>& pathologies,
                                           const PromptSet& prompts, const InferenceModel& im);

double cosine(std::span<const float> a, std::span<const float> b);

// "AFH1", u32 height, u32 width, height·width f32, all little-endian.
std::string encode_afh1(const Heatmap& hm);
Heatmap decode_afh1(const std::string& bytes);
void write_heatmap(const std::filesystem::path& path, const Heatmap& hm);
Heatmap read_heatmap(const std::filesystem::path& path);

// Source image (resampled to the heatmap size if needed) blended toward red in
// proportion to max(value, 0).
Image overlay(const Image& image, const Heatmap& hm);

}  // namespace mlg
