#pragma once

#include "mlg/data/corpus.hpp"
#include "mlg/rng.hpp"

namespace mlg {

struct AugmentParams {
  bool shuffle = true;
  double keep_ratio = 1.0;  // in (0, 1]
};

// Keeps max(1, round(keep_ratio·P)) randomly chosen sentences, permuted when
// `shuffle`, otherwise in original order. The augmented text is placed in
// `findings` with `impression` cleared; an unchanged report is returned as is.
Report augment_report(const Report& report, Engine& rng, const AugmentParams& params);

}  // namespace mlg
