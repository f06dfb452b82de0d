#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mlg/data/image.hpp"
#include "mlg/infer/inference.hpp"
#include "mlg/rng.hpp"

namespace mlg {

// Both empty -> 0. Throw ValidationError on size mismatch.
double iou(const Mask& a, const Mask& b);
double dice(const Mask& a, const Mask& b);

struct OverlapMeans {
  double iou = 0;
  double dice = 0;
};

const std::vector<double>& default_thresholds();  // 0.1 .. 0.5

// Binarizes with the >= rule at each threshold and averages IoU and Dice.
OverlapMeans multi_threshold_mean(const Heatmap& hm, const Mask& gt, std::span<const double> thresholds);

// (μ_in − μ_out) / sqrt((σ²_in + σ²_out) / 2) with population variances; 0 when
// numerator and denominator are both below 1e-12 in magnitude. Throws
// ValidationError if gt has no inside or no outside pixel.
double cnr(const Heatmap& hm, const Mask& gt);

// Mann–Whitney AUROC with ties counted as one half. Throws ValidationError
// unless both classes are present.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct Interval {
  double mean = 0;
  double lo = 0;
  double hi = 0;
};

// Percentile of sorted data by linear interpolation between order statistics
// (rank (n−1)·q, 0-based).
double percentile_sorted(std::span<const double> sorted, double q);

// Replicate r draws from Engine(substream(seed, r)); returns the point value
// and the 2.5th/97.5th percentiles of the replicate statistics.
Interval bootstrap_statistic(double point, int reps, std::uint64_t seed,
                             const std::function<double(Engine&)>& replicate);

// Mean with a percentile bootstrap CI. Throws ValidationError on empty input.
Interval bootstrap_ci(std::span<const double> values, int reps = 1000, std::uint64_t seed = 0);

// AUROC with positives and negatives resampled separately.
Interval bootstrap_auroc(std::span<const double> scores, std::span<const int> labels, int reps = 1000,
                         std::uint64_t seed = 0);

// Mean of group means; each replicate resamples within every group.
Interval bootstrap_macro_mean(const std::vector<std::vector<double>>& groups, int reps = 1000, std::uint64_t seed = 0);

// Threshold with the highest mean IoU over the pairs; ties go to the smaller
// threshold.
double optimal_threshold(std::span<const Heatmap* const> heatmaps, std::span<const Mask* const> masks,
                         std::span<const double> grid);

}  // namespace mlg
