#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mlg/data/annotations.hpp"
#include "mlg/data/corpus.hpp"
#include "mlg/data/image.hpp"
#include "mlg/data/prompts.hpp"

namespace mlg {

// shape is one of "circle", "square", "triangle".
struct ShapeKind {
  std::string shape;
  std::string color;  // "red", "green" or "blue"
  std::string name() const { return color + " " + shape; }
  bool operator==(const ShapeKind&) const = default;
};

std::vector<ShapeKind> default_shape_vocabulary();

struct SynthSpec {
  int image_size = 64;
  std::vector<ShapeKind> vocabulary = default_shape_vocabulary();
  int min_shapes = 1;
  int max_shapes = 3;
  // Side of a shape's bounding square; 0 picks image_size/4 and image_size/3.
  int min_extent = 0;
  int max_extent = 0;
  int count = 1;
  std::uint64_t seed = 0;
  int max_retries = 100;  // placement attempts per shape
  std::string id_prefix = "s";

  // Throws ValidationError.
  void validate() const;
};

struct PlacedShape {
  ShapeKind kind;
  int x = 0;  // bounding square, top-left
  int y = 0;
  int extent = 0;
  std::string sentence;  // e.g. "a red circle in the upper left."
};

struct SynthCorpus {
  Corpus corpus;
  std::vector<Image> images;  // parallel to corpus.reports
  std::vector<std::vector<PlacedShape>> shapes;
  MaskMap masks;              // (id, kind name) -> pixel-exact mask
  PromptSet prompts;          // "a {kind}." / "no {kind}."
};

// Deterministic for a fixed spec; throws GenerationError when shapes cannot be
// placed without overlap.
SynthCorpus synthesize_corpus(const SynthSpec& spec);

// Rasterized footprint of one shape inside its bounding square (extent×extent).
std::vector<std::uint8_t> shape_footprint(const std::string& shape, int extent);

// Template used for the short prompt mode of the prompt comparison.
std::string simple_prompt(const std::string& pathology);

// Every word the generator, its prompts and simple_prompt() can emit.
std::vector<std::string> synth_words(const SynthSpec& spec);

// Writes corpus.jsonl, images/, masks/, annotations.jsonl, prompts.json and
// captions.jsonl (per-shape sentence per (id, pathology)).
void write_synthetic(const std::filesystem::path& dir, const SynthCorpus& synth);

// captions.jsonl reader: (id, pathology) -> caption.
std::map<std::pair<std::string, std::string>, std::string> load_captions(const std::filesystem::path& path);

}  // namespace mlg
