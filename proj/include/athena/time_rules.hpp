#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "athena/frame.hpp"
#include "athena/lstm.hpp"

namespace athena {

// Per-ID inter-arrival intervals with the min-max normalization fitted on
// training data. Normalized values are clamped to [0, 1]. A series whose
// spread sits below the capture clock resolution is degenerate: it maps
// everything to 0.5 and denormalizes to norm_min.
struct IntervalSeries {
  std::uint32_t can_id = 0;
  std::vector<double> intervals;
  double norm_min = 0.0;
  double norm_max = 0.0;

  bool degenerate() const;
  double scale() const;  // norm_max - norm_min, 0 when degenerate
  double normalize(double v) const;
  double denormalize(double x) const;
  std::vector<double> normalized() const;
};

// Throws TooFewFrames below 2 timestamps.
IntervalSeries build_interval_series(std::uint32_t can_id,
                                     std::span<const double> timestamps);

struct IntervalBuildResult {
  std::map<std::uint32_t, IntervalSeries> series;
  std::vector<std::uint32_t> skipped;  // fewer than 2 frames
};
IntervalBuildResult build_intervals(std::span<const CanFrame> frames);

// Admissible inter-arrival band for one ID, in seconds. A one-sided rule
// (lower bound only) has upper_bound = +infinity.
struct TimeRule {
  std::uint32_t can_id = 0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double residual_std = 0.0;
  std::string model_digest;
};

// Band from the trained predictor: mean prediction +/- 2 residual standard
// deviations over all training windows, denormalized, lower bound clamped
// at zero. one_sided drops the upper bound.
TimeRule derive_time_rule(const LstmNetwork& net, const IntervalSeries& series,
                          bool one_sided = false);

struct TimeRuleBank {
  std::string schema_version = "athena-time-1";
  LstmConfig config;
  bool one_sided = false;
  std::vector<TimeRule> rules;  // sorted by can_id

  const TimeRule* find(std::uint32_t can_id) const;
};

inline constexpr const char* kTimeBankSchemaVersion = "athena-time-1";

std::string serialize_time_bank(const TimeRuleBank& bank);
TimeRuleBank load_time_bank(const std::string& bytes);

struct TimeTrainReport {
  std::vector<std::uint32_t> skipped_too_few;       // < 2 frames
  std::vector<std::uint32_t> skipped_insufficient;  // not enough windows
  std::map<std::uint32_t, TrainStats> stats;
};

// Trains one rule per ID with enough data; per-ID seeds derive from the
// config seed and the ID so results do not depend on training order.
TimeRuleBank train_time_bank(std::span<const CanFrame> frames,
                             const LstmConfig& config, bool one_sided = false,
                             TimeTrainReport* report = nullptr);

// One verdict per frame. The first frame of an ID has no interval and is
// never flagged; IDs without rules pass. score is the normalized band
// excess (0 inside the band), usable for ranking-based evaluation.
struct TimingVerdict {
  std::size_t frame_index = 0;
  std::uint32_t can_id = 0;
  double timestamp = 0.0;
  double interval = 0.0;  // NaN for the first frame of an ID
  bool flagged = false;
  double score = 0.0;
};

std::vector<TimingVerdict> detect_timing(std::span<const CanFrame> frames,
                                         const TimeRuleBank& bank);

// CSV columns: frame_index, can_id, timestamp, interval, flagged, score.
std::string timing_verdicts_csv(std::span<const TimingVerdict> verdicts);

}  // namespace athena
