#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mlg {

struct PromptTemplates {
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  bool operator==(const PromptTemplates&) const = default;
};

struct PromptSet {
  std::map<std::string, PromptTemplates> pathologies;

  // Throws ValidationError for an unknown pathology.
  const PromptTemplates& at(const std::string& pathology) const;
  std::vector<std::string> names() const;
  // Throws ValidationError when a pathology lacks positive or negative templates.
  void validate() const;
};

PromptSet parse_prompts(const std::string& json_text);
PromptSet load_prompts(const std::filesystem::path& path);
std::string format_prompts(const PromptSet& prompts);
void save_prompts(const std::filesystem::path& path, const PromptSet& prompts);

}  // namespace mlg
