#include "mlg/text/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mlg/error.hpp"
#include "mlg/text/tokenizer.hpp"

namespace mlg {

Report augment_report(const Report& report, Engine& rng, const AugmentParams& params) {
  if (!(params.keep_ratio > 0.0 && params.keep_ratio <= 1.0)) throw ValidationError("keep_ratio must be in (0, 1]");
  const auto sentences = split_sentences(report.text());
  const int p = static_cast<int>(sentences.size());
  const int keep = std::max(1, static_cast<int>(std::lround(params.keep_ratio * p)));
  if (p <= 1 || (!params.shuffle && keep >= p)) return report;

  std::vector<int> idx(p);
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(keep, p));
  if (!params.shuffle) std::sort(idx.begin(), idx.end());

  Report out = report;
  out.findings.clear();
  out.impression.clear();
  for (std::size_t i = 0; i < idx.size(); ++i) out.findings += (i ? " " : "") + sentences[idx[i]];
  return out;
}

}  // namespace mlg
