#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "athena/frame.hpp"

namespace athena {

struct PeriodEstimate {
  std::uint32_t can_id = 0;
  double median_interval = 0.0;
  double interval_iqr = 0.0;
  std::size_t sample_count = 0;  // frames, not intervals
};

enum class PeriodSkipReason { kTooFewFrames, kZeroMedianInterval };

struct PeriodSkip {
  std::uint32_t can_id;
  PeriodSkipReason reason;
};

struct PeriodEstimationResult {
  std::vector<PeriodEstimate> estimates;
  std::vector<PeriodSkip> skipped;
};

// Group of IDs sharing (approximately) one transmission period; the scoping
// unit for rule mining. member_ids sorted ascending.
struct PeriodicCluster {
  int cluster_id = 0;
  std::vector<std::uint32_t> member_ids;
  double representative_period = 0.0;
};

std::map<std::uint32_t, std::vector<double>> timestamps_by_id(
    std::span<const CanFrame> frames);

// Median / IQR of consecutive-timestamp differences for one ID.
// Throws TooFewFrames below 2 frames.
PeriodEstimate estimate_period(std::uint32_t can_id,
                               std::span<const double> timestamps);

// Grouped form: IDs with fewer than 2 frames (or an all-zero interval
// sequence, which has no usable period) are reported and excluded.
PeriodEstimationResult estimate_periods(
    const std::map<std::uint32_t, std::vector<double>>& by_id);

// Single-linkage grouping on log-period distance: two IDs chain into one
// cluster when |log p_i - log p_j| <= log(1 + rel_tolerance). Aperiodic IDs
// (iqr > median) become singleton clusters. Output ordered by representative
// period ascending, ties by lowest member ID.
std::vector<PeriodicCluster> cluster_by_period(
    std::span<const PeriodEstimate> estimates, double rel_tolerance = 0.15);

}  // namespace athena
