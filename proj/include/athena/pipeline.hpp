#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "athena/attack_sim.hpp"
#include "athena/metrics.hpp"
#include "athena/payload_detector.hpp"
#include "athena/rules.hpp"
#include "athena/time_rules.hpp"

namespace athena {

struct MineOptions {
  MiningConfig mining;
  EmConfig em;
  int k_max = 5;
  std::uint64_t seed = 0;
  double cluster_tolerance = 0.15;
  double density_margin = 0.0;
  std::optional<std::vector<GridPoint>> grid;  // enables the Eq-style search
};

struct BicDumpRow {
  std::uint32_t can_id;
  std::string signal_name;
  int component_count;
  double bic;
  bool selected;
};

struct MineReport {
  std::vector<PeriodSkip> skipped_ids;
  std::vector<std::string> notes;
  std::vector<GridPointStats> grid_table;
  double chosen_gamma = 0.0;
  double chosen_theta = 0.0;
};

// Cloud role: ingest -> cluster -> fit PoV models -> mine rules per cluster
// (optionally grid-searching gamma/theta against a validation log).
PayloadRuleBank mine_payload_bank(std::span<const CanFrame> train,
                                  std::span<const CanFrame> validation,
                                  const SignalMap& map,
                                  const MineOptions& options,
                                  const std::string& dataset_digest,
                                  MineReport* report = nullptr);

// Per-candidate BIC table for every (id, signal) of the training log.
std::vector<BicDumpRow> bic_dump(std::span<const CanFrame> train,
                                 const SignalMap& map,
                                 const MineOptions& options);
std::string bic_dump_csv(std::span<const BicDumpRow> rows);

struct FusedDetectOptions {
  DetectorOptions payload;
  bool and_fusion = false;  // default: attack when either detector flags
};

struct DetectOutput {
  PayloadDetectionResult payload;
  std::vector<TimingVerdict> timing;
  std::vector<bool> frame_flags;  // fused, aligned with input frames
  std::optional<MetricsReport> frame_report;           // needs labels
  std::optional<MetricsReport> payload_window_report;  // needs labels
};

DetectOutput run_fused_detect(std::span<const CanFrame> frames,
                              const PayloadRuleBank& payload_bank,
                              const TimeRuleBank& time_bank,
                              const SignalMap& map,
                              const FusedDetectOptions& options = {});

// Window-level ground truth and predictions for the payload detector: units
// are the non-empty windows of each cluster, a window counts as attacked
// when any member frame in it carries the attack label.
struct WindowEval {
  std::vector<bool> predicted;
  std::vector<bool> actual;
  std::vector<double> scores;  // anomaly + violation counts per window
};
WindowEval evaluate_payload_windows(std::span<const CanFrame> frames,
                                    const PayloadRuleBank& bank,
                                    const PayloadDetectionResult& result);

struct PipelineConfig {
  TrafficSpec traffic;
  AttackSpec attack;
  MineOptions mine;
  LstmConfig lstm;
  bool one_sided_time_rules = false;
  FusedDetectOptions detect;
};

// A traffic spec with a cross-ID correlated pair and a few periodic fillers;
// the default subject for pipeline runs.
TrafficSpec default_traffic_spec(double duration = 20.0,
                                 std::uint64_t seed = 42);
// Attack window spans the middle of the trace: [0.4, 0.7] * duration.
AttackSpec default_attack_spec(AttackKind kind, double duration = 20.0);

struct PipelineManifest {
  std::uint64_t seed = 0;
  std::string config_digest;
  std::vector<std::pair<std::string, std::string>> outputs;  // name -> path
  std::vector<std::pair<std::string, std::string>> digests;  // name -> fnv
};
std::string manifest_json(const PipelineManifest& manifest);

// simulate -> inject -> mine -> train-time -> detect -> evaluate, writing
// every artifact under out_dir. Reruns with the same config are
// byte-identical.
PipelineManifest run_pipeline(const PipelineConfig& config,
                              const std::filesystem::path& out_dir);

}  // namespace athena
