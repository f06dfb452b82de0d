#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace mlg {

struct MetricRow {
  std::string pathology;  // "Mean" for the macro row
  std::string metric;     // "IoU", "Dice", "CNR", "AUROC"
  double point = 0;
  double lo = 0;
  double hi = 0;
  std::size_t n = 0;
  bool operator==(const MetricRow&) const = default;
};

struct MetricReport {
  std::vector<MetricRow> rows;

  const MetricRow* find(const std::string& pathology, const std::string& metric) const;
  // One line per pathology, one "value (lo, hi)" column per metric.
  std::string render() const;
  std::string to_jsonl() const;
  static MetricReport from_jsonl(const std::string& text);
  bool operator==(const MetricReport&) const = default;
};

// "0.342 (0.332, 0.350)"
std::string format_ci(double point, double lo, double hi, int digits = 3);

void write_report(const std::filesystem::path& jsonl_path, const std::filesystem::path& table_path,
                  const MetricReport& report);

}  // namespace mlg
