#include "mlg/data/prompts.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mlg/error.hpp"

namespace mlg {

const PromptTemplates& PromptSet::at(const std::string& pathology) const {
  auto it = pathologies.find(pathology);
  if (it == pathologies.end()) throw ValidationError("no prompts for pathology '" + pathology + "'");
  return it->second;
}

std::vector<std::string> PromptSet::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : pathologies) out.push_back(k);
  return out;
}

void PromptSet::validate() const {
  for (const auto& [name, t] : pathologies) {
    if (t.positive.empty()) throw ValidationError("pathology '" + name + "' has no positive template");
    if (t.negative.empty()) throw ValidationError("pathology '" + name + "' has no negative template");
  }
}

PromptSet parse_prompts(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid prompt JSON: ") + e.what(), 0);
  }
  if (!j.is_object()) throw ParseError("prompt file must be a JSON object", 0);
  PromptSet p;
  for (auto it = j.begin(); it != j.end(); ++it) {
    PromptTemplates t;
    const auto& v = it.value();
    auto strings = [&](const char* key) {
      std::vector<std::string> out;
      if (!v.is_object() || !v.contains(key)) return out;
      if (!v[key].is_array()) throw ParseError("'" + it.key() + "." + key + "' must be an array", 0);
      for (const auto& s : v[key]) {
        if (!s.is_string()) throw ParseError("'" + it.key() + "." + key + "' entries must be strings", 0);
        out.push_back(s.get<std::string>());
      }
      return out;
    };
    t.positive = strings("positive");
    t.negative = strings("negative");
    p.pathologies[it.key()] = std::move(t);
  }
  p.validate();
  return p;
}

PromptSet load_prompts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open prompts '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_prompts(ss.str());
}

std::string format_prompts(const PromptSet& prompts) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, t] : prompts.pathologies) j[name] = {{"positive", t.positive}, {"negative", t.negative}};
  return j.dump(2) + "\n";
}

void save_prompts(const std::filesystem::path& path, const PromptSet& prompts) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << format_prompts(prompts);
}

}  // namespace mlg
