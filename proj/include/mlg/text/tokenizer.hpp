#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mlg/data/corpus.hpp"

namespace mlg {

// Tokenizer configuration. Text format, one entry per line:
//
//   <surface>\t<id> [<id> ...]
//
// Lines starting with a single '#' are comments. "[PAD]" and "[UNK]" must be present.
// A surface may map to several ids (an explicit subword split). Entries whose
// surface starts with "##" are continuation pieces: a word with no exact entry
// is split greedily into the longest known prefix followed by the longest
// "##" pieces; if that fails the whole word becomes [UNK].
class Vocabulary {
 public:
  static Vocabulary parse(const std::string& text);
  static Vocabulary load(const std::filesystem::path& path);
  // [PAD]=0, [UNK]=1, then one id per word in the given order.
  static Vocabulary from_words(const std::vector<std::string>& words);

  std::string format() const;
  void save(const std::filesystem::path& path) const;
  std::uint64_t hash() const;

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int size() const { return size_; }  // max id + 1

  // Ids for one lower-cased, punctuation-free word.
  std::vector<int> lookup(const std::string& word) const;

 private:
  std::map<std::string, std::vector<int>> entries_;
  int pad_ = 0;
  int unk_ = 1;
  int size_ = 2;
};

struct Span {
  int begin = 0;
  int end = 0;  // half-open
  int size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

struct TokenizedReport {
  std::vector<int> token_ids;  // length H, padded with [PAD]
  std::vector<Span> word_spans;
  std::vector<Span> sentence_spans;
  std::vector<int> sentence_of_word;
  int valid_len = 0;
  bool truncated = false;

  int words() const { return static_cast<int>(word_spans.size()); }
  int sentences() const { return static_cast<int>(sentence_spans.size()); }
};

// Sentences end at '.', '?', '!' or ';'. Returned sentences are trimmed and
// never empty.
std::vector<std::string> split_sentences(const std::string& text);

// Lower-cases and splits on whitespace, dropping punctuation. Throws
// ValidationError when no word survives. Tokens beyond max_tokens are
// dropped and `truncated` is set.
TokenizedReport tokenize(const std::string& text, const Vocabulary& vocab, int max_tokens);
TokenizedReport tokenize(const Report& report, const Vocabulary& vocab, int max_tokens);

}  // namespace mlg
