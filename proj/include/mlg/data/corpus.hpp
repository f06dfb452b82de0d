#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mlg {

struct Report {
  std::string id;
  std::string image;  // relative to the corpus file's directory
  std::string findings;
  std::string impression;
  std::optional<std::map<std::string, int>> labels;

  // Findings followed by impression, single-space joined.
  std::string text() const;
  bool operator==(const Report&) const = default;
};

struct Corpus {
  std::filesystem::path root;  // directory image paths resolve against
  std::vector<Report> reports;

  std::filesystem::path image_path(const Report& r) const { return root / r.image; }
  const Report* find(const std::string& id) const;
};

// One JSON object per line; blank lines are skipped. Throws ParseError with the
// 1-based line number on malformed records and ValidationError on duplicate
// ids or a report with no text.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(const std::string& text, std::filesystem::path root = {});

void save_corpus(const std::filesystem::path& path, const Corpus& corpus);
std::string format_corpus(const Corpus& corpus);

}  // namespace mlg
