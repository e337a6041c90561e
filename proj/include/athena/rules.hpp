#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "athena/gmm.hpp"
#include "athena/periodic.hpp"

namespace athena {

// One PoV state: "signal of this ID is updating under component k".
struct StateItem {
  std::uint32_t can_id = 0;
  std::string signal_name;
  int component = 1;  // 1-based index into the signal's GmmModel

  auto operator<=>(const StateItem&) const = default;
};

// Windowed snapshot of cluster state: at most one item per (id, signal),
// windows tile the log without overlap.
struct Transaction {
  std::size_t window_index = 0;
  double window_start = 0.0;
  std::vector<StateItem> items;  // sorted, unique
};

// PoV label stream for one (id, signal), input to transaction building.
struct LabeledSignal {
  std::uint32_t can_id = 0;
  std::string signal_name;
  std::vector<PovLabel> labels;
};

struct StatePattern {
  std::vector<StateItem> items;  // sorted
  std::size_t support_count = 0;
  std::size_t n_transactions = 0;

  double support() const {
    return n_transactions == 0
               ? 0.0
               : static_cast<double>(support_count) /
                     static_cast<double>(n_transactions);
  }
};

// X => Y with X, Y disjoint and support(X u Y) = support(X) on counts.
struct InvariantRule {
  std::vector<StateItem> antecedent;
  std::vector<StateItem> consequent;
  double support = 0.0;
  std::size_t support_count = 0;
  int cluster_id = -1;
};

enum class WindowPolicy { kClusterPeriod, kFixed };

struct MiningConfig {
  double gamma = 0.9;   // rule-level support ratio, in (0, 1)
  double theta = 0.05;  // global minimum support, in (0, gamma)
  WindowPolicy window_policy = WindowPolicy::kClusterPeriod;
  double fixed_window = 0.0;       // seconds, when policy is kFixed
  std::size_t max_pattern_size = 4;  // antecedent enumeration cap; 0 = off
  std::size_t count_slack = 0;     // tolerance on the support-count equality
  double lambda_t = 1000.0;        // time penalty weight
  double lambda_e = 1000.0;        // validation-error penalty weight
  double delta_t = 1e-4;           // acceptable check seconds per transaction
  double delta_e = 0.01;           // acceptable benign violation fraction
  bool hinge_penalties = true;     // false = literal linear penalties
};

// Tumbling windows of the given width from the earliest label timestamp;
// within a window each (id, signal) contributes its last label. Windows with
// no labels are dropped. Throws EmptyInput when no stream has labels.
std::vector<Transaction> build_transactions(
    std::span<const LabeledSignal> streams, double window_seconds);

// Exact count ratio; support of the empty set is 1.
double support(std::span<const StateItem> pattern,
               std::span<const Transaction> transactions);

// All itemsets (up to max_pattern_size items when nonzero) occurring in at
// least min_support_count transactions, via FP-tree conditional growth.
// Output canonically ordered: by size, then lexicographic item order.
std::vector<StatePattern> mine_frequent_patterns(
    std::span<const Transaction> transactions, std::size_t min_support_count,
    std::size_t max_pattern_size = 0);

// Derives the meaningful invariant rules from mined patterns: for every
// frequent antecedent whose closure is a proper superset, the rule
// W => closure(W) \ W, kept when the minimum-support bound
// sigma(Z) > max(gamma * min item support, theta) holds on Z = closure(W).
// Deriving consequents from closures is what makes the retained set free of
// redundant (dominated) rules.
std::vector<InvariantRule> derive_rules(
    std::span<const StatePattern> patterns,
    std::span<const Transaction> transactions, const MiningConfig& config);

// True when the rule fires on the transaction and the consequent is absent.
bool rule_violated(const InvariantRule& rule, const Transaction& txn);

struct GridPoint {
  double gamma;
  double theta;
};

struct GridPointStats {
  double gamma = 0.0;
  double theta = 0.0;
  std::size_t rule_count = 0;
  double mean_check_seconds = 0.0;  // per validation transaction
  double validation_error = 0.0;    // benign transactions violating >= 1 rule
  double objective = 0.0;
};

struct GridSearchResult {
  double gamma = 0.0;
  double theta = 0.0;
  std::vector<InvariantRule> rules;
  std::vector<GridPointStats> table;
};

// Maximizes N - lambda_t * pen(T - delta_t) - lambda_e * pen(Err - delta_e)
// over the grid; ties prefer larger theta, then larger gamma. The clock is
// injectable so tests can pin timing.
GridSearchResult human_intervention_search(
    std::span<const Transaction> train,
    std::span<const Transaction> validation, std::span<const GridPoint> grid,
    const MiningConfig& config,
    std::function<double()> now_seconds = {});

std::vector<GridPoint> default_grid();

// ---------------------------------------------------------------------------
// Payload rule bank: the cloud-to-vehicle artifact.

struct BankClusterEntry {
  PeriodicCluster cluster;
  double window_seconds = 0.0;
  std::size_t n_windows = 0;
};

struct BankMeta {
  double gamma = 0.9;
  double theta = 0.05;
  std::string window_policy = "cluster_period";
  double fixed_window = 0.0;
  std::string dataset_digest;
  int k_max = 5;
  std::uint64_t seed = 0;
  double cluster_tolerance = 0.15;
  std::size_t max_pattern_size = 4;
  std::size_t count_slack = 0;
  double density_margin = 0.0;
};

struct PayloadRuleBank {
  std::string schema_version = "athena-bank-1";
  BankMeta meta;
  std::vector<BankClusterEntry> clusters;
  std::vector<GmmModel> models;  // sorted by (can_id, signal_name)
  std::vector<InvariantRule> rules;

  const GmmModel* find_model(std::uint32_t can_id,
                             const std::string& signal_name) const;
  const BankClusterEntry* find_cluster(std::uint32_t can_id) const;
};

inline constexpr const char* kBankSchemaVersion = "athena-bank-1";

// Canonical JSON: sorted keys, shortest round-trip floats. Identical banks
// serialize to identical bytes.
std::string serialize_rule_bank(const PayloadRuleBank& bank);

// Validates every structural invariant; throws SchemaMismatch on an unknown
// schema_version and IntegrityError on dangling references or corrupt
// models.
PayloadRuleBank load_rule_bank(const std::string& bytes);

}  // namespace athena
