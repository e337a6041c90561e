#include "athena/payload_detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "athena/errors.hpp"
#include "athena/ingest.hpp"
#include "athena/util.hpp"

namespace athena {

MembershipCheck check_membership(const GmmModel& model, double delta,
                                 const DetectorOptions& options) {
  const Responsibilities resp = responsibilities(model, delta);
  MembershipCheck out;
  out.component = resp.component;
  out.responsibility = resp.r[static_cast<std::size_t>(resp.component - 1)];
  out.log_density = resp.log_density;

  bool below_all = true;
  for (int k = 0; k < model.component_count; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    if (resp.r[ku] >= model.min_membership[ku]) {
      below_all = false;
      break;
    }
  }
  out.anomalous = below_all;
  if (!out.anomalous && options.density_fallback &&
      std::isfinite(model.min_train_log_density)) {
    out.anomalous = resp.log_density <
                    model.min_train_log_density - options.density_margin;
  }
  return out;
}

std::vector<std::size_t> check_rules(const Transaction& txn,
                                     const PayloadRuleBank& bank) {
  std::vector<std::size_t> violated;
  for (std::size_t i = 0; i < bank.rules.size(); ++i) {
    if (rule_violated(bank.rules[i], txn)) violated.push_back(i);
  }
  return violated;
}

PayloadDetector::PayloadDetector(const PayloadRuleBank& bank,
                                 const SignalMap& map, DetectorOptions options)
    : bank_(bank), options_(options) {
  for (std::size_t pos = 0; pos < bank.clusters.size(); ++pos) {
    for (std::uint32_t id : bank.clusters[pos].cluster.member_ids) {
      cluster_of_id_[id] = static_cast<int>(pos);
    }
  }
  cluster_rules_.resize(bank.clusters.size());
  for (std::size_t i = 0; i < bank.rules.size(); ++i) {
    for (std::size_t pos = 0; pos < bank.clusters.size(); ++pos) {
      if (bank.clusters[pos].cluster.cluster_id == bank.rules[i].cluster_id) {
        cluster_rules_[pos].push_back(i);
        break;
      }
    }
  }
  cluster_state_.resize(bank.clusters.size());

  for (const GmmModel& model : bank.models) {
    models_[{model.can_id, model.signal_name}] = &model;
    if (!specs_by_id_.count(model.can_id)) {
      const std::vector<SignalSpec>* specs = map.find(model.can_id);
      specs_by_id_[model.can_id] =
          specs ? *specs : SignalMap::default_byte_signals();
    }
  }
}

void PayloadDetector::finalize_window(int cluster_pos) {
  const auto pos = static_cast<std::size_t>(cluster_pos);
  ClusterState& cs = cluster_state_[pos];
  if (cs.items.empty() && cs.anomalies.empty()) return;

  const BankClusterEntry& entry = bank_.clusters[pos];
  Transaction txn;
  txn.window_index = static_cast<std::size_t>(cs.window_index);
  txn.window_start =
      cs.origin + static_cast<double>(cs.window_index) * entry.window_seconds;
  for (const auto& [key, component] : cs.items) {
    txn.items.push_back({key.first, key.second, component});
  }
  std::sort(txn.items.begin(), txn.items.end());

  PayloadVerdict verdict;
  verdict.cluster_id = entry.cluster.cluster_id;
  verdict.window_index = cs.window_index;
  verdict.window_start = txn.window_start;
  verdict.membership_anomalies = std::move(cs.anomalies);
  for (std::size_t rule_index : cluster_rules_[pos]) {
    if (rule_violated(bank_.rules[rule_index], txn)) {
      verdict.violated_rules.push_back(rule_index);
    }
  }
  verdict.is_attack = !verdict.membership_anomalies.empty() ||
                      !verdict.violated_rules.empty();
  verdicts_.push_back(std::move(verdict));

  cs.items.clear();
  cs.anomalies.clear();
}

void PayloadDetector::push(const CanFrame& frame) {
  auto specs_it = specs_by_id_.find(frame.can_id);
  auto cluster_it = cluster_of_id_.find(frame.can_id);
  if (specs_it == specs_by_id_.end() || cluster_it == cluster_of_id_.end()) {
    unknown_ids_.push_back({frame.timestamp, frame.can_id});
    if (options_.unknown_id == UnknownIdPolicy::kFlag) {
      PayloadVerdict flag;
      flag.cluster_id = -1;
      flag.window_index = -1;
      flag.window_start = frame.timestamp;
      flag.is_attack = true;
      verdicts_.push_back(std::move(flag));
    }
    return;
  }
  const int cluster_pos = cluster_it->second;
  const BankClusterEntry& entry =
      bank_.clusters[static_cast<std::size_t>(cluster_pos)];

  for (const SignalSpec& spec : specs_it->second) {
    if (spec.start_bit + spec.bit_length > frame.dlc * 8) continue;
    auto model_it = models_.find({frame.can_id, spec.name});
    if (model_it == models_.end()) continue;
    const double value = decode_signal(frame, spec);
    const auto key = std::make_pair(frame.can_id, spec.name);
    auto last_it = last_value_.find(key);
    if (last_it != last_value_.end()) {
      const double delta = value - last_it->second;
      const double t = frame.timestamp;
      ClusterState& cs =
          cluster_state_[static_cast<std::size_t>(cluster_pos)];
      if (!cs.started) {
        cs.started = true;
        cs.origin = t;
        cs.window_index = 0;
      }
      const auto idx = static_cast<std::int64_t>(
          std::floor((t - cs.origin) / entry.window_seconds));
      if (idx > cs.window_index) {
        finalize_window(cluster_pos);
        cs.window_index = idx;
      }
      const MembershipCheck mc =
          check_membership(*model_it->second, delta, options_);
      cs.items[key] = mc.component;
      if (mc.anomalous) {
        cs.anomalies.push_back(
            {frame.can_id, spec.name, t, mc.component, mc.responsibility,
             model_it->second
                 ->min_membership[static_cast<std::size_t>(mc.component - 1)]});
      }
    }
    last_value_[key] = value;
  }
}

void PayloadDetector::finish() {
  for (std::size_t pos = 0; pos < cluster_state_.size(); ++pos) {
    if (cluster_state_[pos].started) finalize_window(static_cast<int>(pos));
  }
}

std::vector<PayloadVerdict> PayloadDetector::take_verdicts() {
  std::vector<PayloadVerdict> out = std::move(verdicts_);
  verdicts_.clear();
  return out;
}

std::vector<UnknownIdEvent> PayloadDetector::take_unknown_ids() {
  std::vector<UnknownIdEvent> out = std::move(unknown_ids_);
  unknown_ids_.clear();
  return out;
}

std::map<int, double> PayloadDetector::cluster_origins() const {
  std::map<int, double> origins;
  for (std::size_t pos = 0; pos < cluster_state_.size(); ++pos) {
    if (cluster_state_[pos].started) {
      origins[bank_.clusters[pos].cluster.cluster_id] =
          cluster_state_[pos].origin;
    }
  }
  return origins;
}

PayloadDetectionResult detect_payload_stream(std::span<const CanFrame> frames,
                                             const PayloadRuleBank& bank,
                                             const SignalMap& map,
                                             const DetectorOptions& options) {
  PayloadDetector detector(bank, map, options);
  for (const CanFrame& frame : frames) detector.push(frame);
  detector.finish();

  PayloadDetectionResult result;
  result.verdicts = detector.take_verdicts();
  result.unknown_ids = detector.take_unknown_ids();
  result.cluster_origins = detector.cluster_origins();
  std::sort(result.verdicts.begin(), result.verdicts.end(),
            [](const PayloadVerdict& a, const PayloadVerdict& b) {
              if (a.cluster_id != b.cluster_id) {
                return a.cluster_id < b.cluster_id;
              }
              if (a.window_index != b.window_index) {
                return a.window_index < b.window_index;
              }
              return a.window_start < b.window_start;
            });
  return result;
}

std::string payload_verdicts_csv(const PayloadDetectionResult& result) {
  std::string out =
      "window_index,window_start,is_attack,n_membership_anomalies,"
      "violated_rule_ids\n";
  char buf[64];
  for (const PayloadVerdict& v : result.verdicts) {
    std::snprintf(buf, sizeof(buf), "%lld,",
                  static_cast<long long>(v.window_index));
    out += buf;
    out += format_seconds(v.window_start);
    std::snprintf(buf, sizeof(buf), ",%d,%zu,", v.is_attack ? 1 : 0,
                  v.membership_anomalies.size());
    out += buf;
    for (std::size_t i = 0; i < v.violated_rules.size(); ++i) {
      if (i > 0) out += ';';
      out += std::to_string(v.violated_rules[i]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace athena
