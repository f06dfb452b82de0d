#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mlg/align/model.hpp"
#include "mlg/align/trainer.hpp"
#include "mlg/text/tokenizer.hpp"
#include "mlg/vision/preprocess.hpp"

namespace mlg {

// Single-file container:
//
//   "MLGCKPT\0", u32 version, u32 section count,
//   per section: u32 name length, name, u64 payload length, payload
//
// Sections: "manifest" (JSON), "model" (tensors), "tokenizer" (vocabulary
// text) and, when present, "state" (optimizer moments and best parameters).
// Integers and floats are little-endian.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  Model<float> model;
  Vocabulary vocab;
  NormStats stats;
  std::optional<TrainState> state;
  // RunConfig text the model was trained with; informational, not part of
  // the fingerprint.
  std::string run_config;
};

std::string encode_checkpoint(const Checkpoint& ck);
// Throws ParseError on a malformed container and ValidationError when the
// stored fingerprint, tokenizer hash or tensor shapes disagree with the
// manifest.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
// InputError when the file cannot be read.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Bytes of the "model" section alone.
std::string encode_model_section(const Model<float>& model);

// FNV-1a over the encoded model section.
std::uint64_t model_checksum(const Model<float>& model);

}  // namespace mlg
