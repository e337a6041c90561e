#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "athena/frame.hpp"
#include "athena/rules.hpp"

namespace athena {

enum class UnknownIdPolicy { kIgnore, kFlag };

struct DetectorOptions {
  bool density_fallback = true;
  double density_margin = 0.0;
  UnknownIdPolicy unknown_id = UnknownIdPolicy::kIgnore;
};

struct MembershipCheck {
  int component = 1;            // argmax, 1-based
  double responsibility = 1.0;  // of the argmax component
  double log_density = 0.0;
  bool anomalous = false;
};

// Membership test for one update: anomalous when every component's
// responsibility falls below that component's training minimum, or (with the
// density fallback) when the mixture log-density drops below the training
// minimum minus the margin. The fallback exists because normalized
// responsibilities cannot flag out-of-range updates on a K=1 model.
MembershipCheck check_membership(const GmmModel& model, double delta,
                                 const DetectorOptions& options = {});

// Indices into bank.rules of rules whose antecedent holds on the transaction
// while the consequent does not.
std::vector<std::size_t> check_rules(const Transaction& txn,
                                     const PayloadRuleBank& bank);

struct MembershipAnomaly {
  std::uint32_t can_id = 0;
  std::string signal_name;
  double timestamp = 0.0;
  int component = 1;
  double responsibility = 0.0;
  double threshold = 0.0;  // min_membership of the argmax component
};

struct PayloadVerdict {
  int cluster_id = -1;
  std::int64_t window_index = 0;  // -1 marks an unknown-id flag row
  double window_start = 0.0;
  std::vector<MembershipAnomaly> membership_anomalies;
  std::vector<std::size_t> violated_rules;  // indices into bank.rules
  bool is_attack = false;
};

struct UnknownIdEvent {
  double timestamp = 0.0;
  std::uint32_t can_id = 0;
};

struct PayloadDetectionResult {
  std::vector<PayloadVerdict> verdicts;
  std::vector<UnknownIdEvent> unknown_ids;
  // cluster_id -> timestamp of the first delta seen, the window tiling
  // origin for that cluster.
  std::map<int, double> cluster_origins;
};

// Streaming evaluation: per-signal last value plus one open window per
// cluster; memory is constant in the stream length. Frames may arrive in
// chunks; verdicts are identical to one-shot processing for any split.
class PayloadDetector {
 public:
  PayloadDetector(const PayloadRuleBank& bank, const SignalMap& map,
                  DetectorOptions options = {});

  void push(const CanFrame& frame);
  void finish();  // flush open windows

  // Drains verdicts accumulated so far.
  std::vector<PayloadVerdict> take_verdicts();
  std::vector<UnknownIdEvent> take_unknown_ids();
  std::map<int, double> cluster_origins() const;

 private:
  struct ClusterState {
    double origin = 0.0;
    bool started = false;
    std::int64_t window_index = 0;
    std::map<std::pair<std::uint32_t, std::string>, int> items;
    std::vector<MembershipAnomaly> anomalies;
  };

  void finalize_window(int cluster_pos);

  const PayloadRuleBank& bank_;
  DetectorOptions options_;
  // (can_id, signal spec list) resolution and model/cluster lookups
  std::map<std::uint32_t, std::vector<SignalSpec>> specs_by_id_;
  std::map<std::pair<std::uint32_t, std::string>, const GmmModel*> models_;
  std::map<std::uint32_t, int> cluster_of_id_;  // position in bank_.clusters
  std::vector<std::vector<std::size_t>> cluster_rules_;
  std::vector<ClusterState> cluster_state_;
  std::map<std::pair<std::uint32_t, std::string>, double> last_value_;
  std::vector<PayloadVerdict> verdicts_;
  std::vector<UnknownIdEvent> unknown_ids_;
};

// One-shot wrapper; verdicts sorted by (cluster_id, window_index).
PayloadDetectionResult detect_payload_stream(std::span<const CanFrame> frames,
                                             const PayloadRuleBank& bank,
                                             const SignalMap& map,
                                             const DetectorOptions& options = {});

// CSV columns: window_index, window_start, is_attack,
// n_membership_anomalies, violated_rule_ids (semicolon-joined).
std::string payload_verdicts_csv(const PayloadDetectionResult& result);

}  // namespace athena
