#include "mlg/data/corpus.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "mlg/error.hpp"

namespace mlg {

using ojson = nlohmann::ordered_json;

std::string Report::text() const {
  if (findings.empty()) return impression;
  if (impression.empty()) return findings;
  return findings + " " + impression;
}

const Report* Corpus::find(const std::string& id) const {
  for (const auto& r : reports)
    if (r.id == id) return &r;
  return nullptr;
}

namespace {

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

std::string required_string(const ojson& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing \"") + key + "\"", line);
  if (!it->is_string()) throw ParseError(std::string("\"") + key + "\" must be a string", line);
  return it->get<std::string>();
}

Report parse_record(const std::string& line_text, std::size_t line) {
  ojson j;
  try {
    j = ojson::parse(line_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line);
  }
  if (!j.is_object()) throw ParseError("record must be a JSON object", line);
  Report r;
  r.id = required_string(j, "id", line);
  r.image = required_string(j, "image", line);
  auto rep = j.find("report");
  if (rep == j.end() || !rep->is_object()) throw ParseError("missing \"report\" object", line);
  if (auto f = rep->find("findings"); f != rep->end()) {
    if (!f->is_string()) throw ParseError("\"findings\" must be a string", line);
    r.findings = f->get<std::string>();
  }
  if (auto f = rep->find("impression"); f != rep->end()) {
    if (!f->is_string()) throw ParseError("\"impression\" must be a string", line);
    r.impression = f->get<std::string>();
  }
  if (blank(r.findings) && blank(r.impression))
    throw ValidationError("line " + std::to_string(line) + ": report '" + r.id + "' has no text");
  if (auto lab = j.find("labels"); lab != j.end() && !lab->is_null()) {
    if (!lab->is_object()) throw ParseError("\"labels\" must be an object", line);
    std::map<std::string, int> labels;
    for (auto it = lab->begin(); it != lab->end(); ++it) {
      if (!it->is_number_integer() || (it->get<int>() != 0 && it->get<int>() != 1))
        throw ParseError("label '" + it.key() + "' must be 0 or 1", line);
      labels[it.key()] = it->get<int>();
    }
    r.labels = std::move(labels);
  }
  return r;
}

}  // namespace

Corpus parse_corpus(const std::string& text, std::filesystem::path root) {
  Corpus c;
  c.root = std::move(root);
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    Report r = parse_record(line, line_no);
    if (!seen.insert(r.id).second)
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate id '" + r.id + "'");
    c.reports.push_back(std::move(r));
  }
  return c;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str(), path.parent_path());
}

std::string format_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus.reports) {
    ojson j;
    j["id"] = r.id;
    j["image"] = r.image;
    j["report"] = {{"findings", r.findings}, {"impression", r.impression}};
    if (r.labels) {
      ojson lab = ojson::object();
      for (const auto& [k, v] : *r.labels) lab[k] = v;
      j["labels"] = std::move(lab);
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << format_corpus(corpus);
}

}  // namespace mlg
