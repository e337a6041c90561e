#include "athena/periodic.hpp"

#include <algorithm>
#include <cmath>

#include "athena/errors.hpp"
#include "athena/util.hpp"

namespace athena {

std::map<std::uint32_t, std::vector<double>> timestamps_by_id(
    std::span<const CanFrame> frames) {
  std::map<std::uint32_t, std::vector<double>> by_id;
  for (const CanFrame& f : frames) by_id[f.can_id].push_back(f.timestamp);
  return by_id;
}

PeriodEstimate estimate_period(std::uint32_t can_id,
                               std::span<const double> timestamps) {
  if (timestamps.size() < 2) {
    raise(Errc::kTooFewFrames,
          "fewer than 2 frames for id " + hex_id(can_id));
  }
  std::vector<double> intervals;
  intervals.reserve(timestamps.size() - 1);
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    intervals.push_back(timestamps[i] - timestamps[i - 1]);
  }
  std::sort(intervals.begin(), intervals.end());

  PeriodEstimate est;
  est.can_id = can_id;
  est.sample_count = timestamps.size();
  est.median_interval = quantile_sorted(intervals, 0.5);
  est.interval_iqr =
      quantile_sorted(intervals, 0.75) - quantile_sorted(intervals, 0.25);
  return est;
}

PeriodEstimationResult estimate_periods(
    const std::map<std::uint32_t, std::vector<double>>& by_id) {
  PeriodEstimationResult result;
  for (const auto& [id, timestamps] : by_id) {
    if (timestamps.size() < 2) {
      result.skipped.push_back({id, PeriodSkipReason::kTooFewFrames});
      continue;
    }
    PeriodEstimate est = estimate_period(id, timestamps);
    if (est.median_interval <= 0.0) {
      // Back-to-back duplicates dominate; no period to speak of.
      result.skipped.push_back({id, PeriodSkipReason::kZeroMedianInterval});
      continue;
    }
    result.estimates.push_back(est);
  }
  return result;
}

std::vector<PeriodicCluster> cluster_by_period(
    std::span<const PeriodEstimate> estimates, double rel_tolerance) {
  if (!(rel_tolerance > 0.0 && rel_tolerance < 1.0)) {
    raise(Errc::kInvalidSpec, "rel_tolerance must be in (0, 1)");
  }

  std::vector<const PeriodEstimate*> periodic;
  std::vector<const PeriodEstimate*> aperiodic;
  for (const PeriodEstimate& e : estimates) {
    (e.interval_iqr > e.median_interval ? aperiodic : periodic).push_back(&e);
  }

  struct Group {
    std::vector<std::uint32_t> ids;
    std::vector<double> medians;
  };
  std::vector<Group> groups;

  // 1-D single linkage == chain over sorted log-periods, split where the
  // adjacent gap exceeds the threshold.
  std::sort(periodic.begin(), periodic.end(),
            [](const PeriodEstimate* a, const PeriodEstimate* b) {
              if (a->median_interval != b->median_interval) {
                return a->median_interval < b->median_interval;
              }
              return a->can_id < b->can_id;
            });
  const double threshold = std::log1p(rel_tolerance);
  for (std::size_t i = 0; i < periodic.size(); ++i) {
    const bool chain =
        i > 0 && std::log(periodic[i]->median_interval) -
                         std::log(periodic[i - 1]->median_interval) <=
                     threshold;
    if (!chain) groups.emplace_back();
    groups.back().ids.push_back(periodic[i]->can_id);
    groups.back().medians.push_back(periodic[i]->median_interval);
  }
  for (const PeriodEstimate* e : aperiodic) {
    groups.push_back({{e->can_id}, {e->median_interval}});
  }

  std::vector<PeriodicCluster> clusters;
  clusters.reserve(groups.size());
  for (Group& g : groups) {
    PeriodicCluster c;
    std::sort(g.ids.begin(), g.ids.end());
    c.member_ids = std::move(g.ids);
    c.representative_period = median(std::move(g.medians));
    clusters.push_back(std::move(c));
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const PeriodicCluster& a, const PeriodicCluster& b) {
              if (a.representative_period != b.representative_period) {
                return a.representative_period < b.representative_period;
              }
              return a.member_ids.front() < b.member_ids.front();
            });
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    clusters[i].cluster_id = static_cast<int>(i);
  }
  return clusters;
}

}  // namespace athena
