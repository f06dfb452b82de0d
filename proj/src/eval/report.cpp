#include "mlg/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mlg/error.hpp"

namespace mlg {

const MetricRow* MetricReport::find(const std::string& pathology, const std::string& metric) const {
  for (const auto& r : rows)
    if (r.pathology == pathology && r.metric == metric) return &r;
  return nullptr;
}

std::string format_ci(double point, double lo, double hi, int digits) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f (%.*f, %.*f)", digits, point, digits, lo, digits, hi);
  return buf;
}

std::string MetricReport::render() const {
  std::vector<std::string> metrics, pathologies;
  for (const auto& r : rows) {
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) metrics.push_back(r.metric);
    if (std::find(pathologies.begin(), pathologies.end(), r.pathology) == pathologies.end())
      pathologies.push_back(r.pathology);
  }
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Pathology"};
  header.insert(header.end(), metrics.begin(), metrics.end());
  header.push_back("n");
  cells.push_back(header);
  for (const auto& p : pathologies) {
    std::vector<std::string> line{p};
    std::size_t n = 0;
    for (const auto& m : metrics) {
      const MetricRow* r = find(p, m);
      line.push_back(r ? format_ci(r->point, r->lo, r->hi) : "-");
      if (r) n = std::max(n, r->n);
    }
    line.push_back(std::to_string(n));
    cells.push_back(line);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  std::string out;
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      out += line[c];
      if (c + 1 < line.size()) out += std::string(width[c] - line[c].size() + 2, ' ');
    }
    out += '\n';
  }
  return out;
}

std::string MetricReport::to_jsonl() const {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j{{"pathology", r.pathology}, {"metric", r.metric}, {"value", r.point},
                             {"ci_low", r.lo},           {"ci_high", r.hi},    {"n", r.n}};
    out += j.dump() + "\n";
  }
  return out;
}

MetricReport MetricReport::from_jsonl(const std::string& text) {
  MetricReport rep;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      rep.rows.push_back({j.at("pathology"), j.at("metric"), j.at("value"), j.at("ci_low"), j.at("ci_high"), j.at("n")});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad metric record: ") + e.what(), line_no);
    }
  }
  return rep;
}

void write_report(const std::filesystem::path& jsonl_path, const std::filesystem::path& table_path,
                  const MetricReport& report) {
  for (const auto& [path, body] : {std::pair{jsonl_path, report.to_jsonl()}, std::pair{table_path, report.render()}}) {
    if (path.empty()) continue;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << body;
  }
}

}  // namespace mlg
