#include "athena/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "athena/errors.hpp"
#include "athena/ingest.hpp"
#include "athena/util.hpp"

namespace athena {

namespace {

std::uint64_t signal_seed(std::uint64_t base, std::uint32_t can_id,
                          const std::string& signal_name) {
  return base ^ fnv1a64(hex_id(can_id) + "/" + signal_name);
}

std::size_t min_count_for_theta(double theta, std::size_t n_transactions) {
  return static_cast<std::size_t>(
             std::floor(theta * static_cast<double>(n_transactions))) +
         1;
}

struct FittedCluster {
  int cluster_pos = 0;  // index into bank.clusters
  std::vector<Transaction> transactions;
  std::vector<StatePattern> patterns;
};

}  // namespace

PayloadRuleBank mine_payload_bank(std::span<const CanFrame> train,
                                  std::span<const CanFrame> validation,
                                  const SignalMap& map,
                                  const MineOptions& options,
                                  const std::string& dataset_digest,
                                  MineReport* report) {
  if (train.empty()) raise(Errc::kEmptyInput, "no training frames");

  const PeriodEstimationResult periods =
      estimate_periods(timestamps_by_id(train));
  if (report) report->skipped_ids = periods.skipped;
  const std::vector<PeriodicCluster> clusters =
      cluster_by_period(periods.estimates, options.cluster_tolerance);

  std::set<std::uint32_t> clustered;
  for (const PeriodicCluster& c : clusters) {
    clustered.insert(c.member_ids.begin(), c.member_ids.end());
  }

  PayloadRuleBank bank;
  bank.meta.gamma = options.mining.gamma;
  bank.meta.theta = options.mining.theta;
  bank.meta.window_policy =
      options.mining.window_policy == WindowPolicy::kFixed ? "fixed"
                                                           : "cluster_period";
  bank.meta.fixed_window = options.mining.fixed_window;
  bank.meta.dataset_digest = dataset_digest;
  bank.meta.k_max = options.k_max;
  bank.meta.seed = options.seed;
  bank.meta.cluster_tolerance = options.cluster_tolerance;
  bank.meta.max_pattern_size = options.mining.max_pattern_size;
  bank.meta.count_slack = options.mining.count_slack;
  bank.meta.density_margin = options.density_margin;

  // PoV models for every signal of a clustered ID.
  std::map<std::uint32_t, std::vector<LabeledSignal>> labeled_by_id;
  for (const SignalSeries& series : extract_signals(train, map)) {
    if (!clustered.count(series.can_id)) continue;
    if (series.values.size() < 2) {
      if (report) {
        report->notes.push_back("skipped " + hex_id(series.can_id) + "/" +
                                series.signal_name + ": fewer than 2 points");
      }
      continue;
    }
    const DeltaSeries deltas = compute_deltas(series);
    GmmModel model = select_model(
        deltas, options.k_max,
        signal_seed(options.seed, series.can_id, series.signal_name),
        options.em);
    model.bic = bic_score(model, deltas);
    LabeledSignal labeled{series.can_id, series.signal_name,
                          label_povs(model, deltas)};
    labeled_by_id[series.can_id].push_back(std::move(labeled));
    bank.models.push_back(std::move(model));
  }
  std::sort(bank.models.begin(), bank.models.end(),
            [](const GmmModel& a, const GmmModel& b) {
              if (a.can_id != b.can_id) return a.can_id < b.can_id;
              return a.signal_name < b.signal_name;
            });

  // Transactions per cluster, and mined patterns at the loosest theta the
  // run will need.
  double theta_min = options.mining.theta;
  if (options.grid) {
    for (const GridPoint& p : *options.grid) {
      theta_min = std::min(theta_min, p.theta);
    }
  }

  std::vector<FittedCluster> fitted;
  for (const PeriodicCluster& cluster : clusters) {
    BankClusterEntry entry;
    entry.cluster = cluster;
    entry.window_seconds =
        options.mining.window_policy == WindowPolicy::kFixed
            ? options.mining.fixed_window
            : cluster.representative_period;

    std::vector<LabeledSignal> streams;
    for (std::uint32_t id : cluster.member_ids) {
      auto it = labeled_by_id.find(id);
      if (it == labeled_by_id.end()) continue;
      streams.insert(streams.end(), it->second.begin(), it->second.end());
    }
    FittedCluster fc;
    fc.cluster_pos = static_cast<int>(bank.clusters.size());
    if (!streams.empty()) {
      fc.transactions = build_transactions(streams, entry.window_seconds);
    }
    entry.n_windows = fc.transactions.size();
    if (!fc.transactions.empty()) {
      fc.patterns = mine_frequent_patterns(
          fc.transactions, min_count_for_theta(theta_min, fc.transactions.size()),
          options.mining.max_pattern_size);
    }
    bank.clusters.push_back(std::move(entry));
    fitted.push_back(std::move(fc));
  }

  auto derive_all = [&](double gamma,
                        double theta) -> std::vector<InvariantRule> {
    MiningConfig cfg = options.mining;
    cfg.gamma = gamma;
    cfg.theta = theta;
    std::vector<InvariantRule> rules;
    for (const FittedCluster& fc : fitted) {
      std::vector<InvariantRule> cluster_rules =
          derive_rules(fc.patterns, fc.transactions, cfg);
      const int cluster_id =
          bank.clusters[static_cast<std::size_t>(fc.cluster_pos)]
              .cluster.cluster_id;
      for (InvariantRule& r : cluster_rules) r.cluster_id = cluster_id;
      rules.insert(rules.end(),
                   std::make_move_iterator(cluster_rules.begin()),
                   std::make_move_iterator(cluster_rules.end()));
    }
    return rules;
  };

  if (!options.grid) {
    bank.rules = derive_all(options.mining.gamma, options.mining.theta);
    if (report) {
      report->chosen_gamma = options.mining.gamma;
      report->chosen_theta = options.mining.theta;
    }
    return bank;
  }

  // Validation transactions, labeled with the training-time models.
  std::map<std::pair<std::uint32_t, std::string>, const GmmModel*> model_of;
  for (const GmmModel& m : bank.models) {
    model_of[{m.can_id, m.signal_name}] = &m;
  }
  std::vector<std::vector<Transaction>> validation_txns(fitted.size());
  if (!validation.empty()) {
    std::map<std::uint32_t, std::vector<LabeledSignal>> val_by_id;
    for (const SignalSeries& series : extract_signals(validation, map)) {
      auto it = model_of.find({series.can_id, series.signal_name});
      if (it == model_of.end() || series.values.size() < 2) continue;
      const DeltaSeries deltas = compute_deltas(series);
      val_by_id[series.can_id].push_back(
          {series.can_id, series.signal_name,
           label_povs(*it->second, deltas)});
    }
    for (std::size_t i = 0; i < fitted.size(); ++i) {
      const BankClusterEntry& entry = bank.clusters[i];
      std::vector<LabeledSignal> streams;
      for (std::uint32_t id : entry.cluster.member_ids) {
        auto it = val_by_id.find(id);
        if (it == val_by_id.end()) continue;
        streams.insert(streams.end(), it->second.begin(), it->second.end());
      }
      if (!streams.empty()) {
        validation_txns[i] =
            build_transactions(streams, entry.window_seconds);
      }
    }
  }
  std::size_t total_validation = 0;
  for (const auto& txns : validation_txns) total_validation += txns.size();

  const auto now_seconds = [] {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  };

  bool have_best = false;
  double best_objective = 0.0;
  double best_gamma = 0.0, best_theta = 0.0;
  std::vector<InvariantRule> best_rules;
  for (const GridPoint& point : *options.grid) {
    std::vector<InvariantRule> rules = derive_all(point.gamma, point.theta);

    std::size_t violating = 0;
    const double t0 = now_seconds();
    for (std::size_t i = 0; i < fitted.size(); ++i) {
      const int cluster_id =
          bank.clusters[i].cluster.cluster_id;
      for (const Transaction& txn : validation_txns[i]) {
        for (const InvariantRule& rule : rules) {
          if (rule.cluster_id == cluster_id && rule_violated(rule, txn)) {
            ++violating;
            break;
          }
        }
      }
    }
    const double t1 = now_seconds();

    GridPointStats stats;
    stats.gamma = point.gamma;
    stats.theta = point.theta;
    stats.rule_count = rules.size();
    stats.mean_check_seconds =
        total_validation == 0
            ? 0.0
            : (t1 - t0) / static_cast<double>(total_validation);
    stats.validation_error =
        total_validation == 0
            ? 0.0
            : static_cast<double>(violating) /
                  static_cast<double>(total_validation);
    const double over_t = stats.mean_check_seconds - options.mining.delta_t;
    const double over_e = stats.validation_error - options.mining.delta_e;
    stats.objective =
        static_cast<double>(rules.size()) -
        options.mining.lambda_t *
            (options.mining.hinge_penalties ? std::max(0.0, over_t) : over_t) -
        options.mining.lambda_e *
            (options.mining.hinge_penalties ? std::max(0.0, over_e) : over_e);
    if (report) report->grid_table.push_back(stats);

    const bool better =
        !have_best || stats.objective > best_objective ||
        (stats.objective == best_objective &&
         (point.theta > best_theta ||
          (point.theta == best_theta && point.gamma > best_gamma)));
    if (better) {
      have_best = true;
      best_objective = stats.objective;
      best_gamma = point.gamma;
      best_theta = point.theta;
      best_rules = std::move(rules);
    }
  }
  if (!have_best) raise(Errc::kEmptyGrid, "empty (gamma, theta) grid");

  bank.meta.gamma = best_gamma;
  bank.meta.theta = best_theta;
  bank.rules = std::move(best_rules);
  if (report) {
    report->chosen_gamma = best_gamma;
    report->chosen_theta = best_theta;
  }
  return bank;
}

std::vector<BicDumpRow> bic_dump(std::span<const CanFrame> train,
                                 const SignalMap& map,
                                 const MineOptions& options) {
  std::vector<BicDumpRow> rows;
  for (const SignalSeries& series : extract_signals(train, map)) {
    if (series.values.size() < 2) continue;
    const DeltaSeries deltas = compute_deltas(series);
    for (const BicCandidate& c : bic_table(
             deltas, options.k_max,
             signal_seed(options.seed, series.can_id, series.signal_name),
             options.em)) {
      rows.push_back({series.can_id, series.signal_name, c.component_count,
                      c.bic, c.selected});
    }
  }
  return rows;
}

std::string bic_dump_csv(std::span<const BicDumpRow> rows) {
  std::string out = "can_id,signal,k,bic,selected\n";
  char buf[128];
  for (const BicDumpRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.9g,%d\n",
                  hex_id(r.can_id).c_str(), r.signal_name.c_str(),
                  r.component_count, r.bic, r.selected ? 1 : 0);
    out += buf;
  }
  return out;
}

DetectOutput run_fused_detect(std::span<const CanFrame> frames,
                              const PayloadRuleBank& payload_bank,
                              const TimeRuleBank& time_bank,
                              const SignalMap& map,
                              const FusedDetectOptions& options) {
  DetectOutput out;
  out.payload =
      detect_payload_stream(frames, payload_bank, map, options.payload);
  out.timing = detect_timing(frames, time_bank);

  std::map<std::pair<int, std::int64_t>, bool> window_flag;
  for (const PayloadVerdict& v : out.payload.verdicts) {
    if (v.window_index >= 0) {
      window_flag[{v.cluster_id, v.window_index}] = v.is_attack;
    }
  }

  out.frame_flags.assign(frames.size(), false);
  bool any_label = false;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const CanFrame& f = frames[i];
    if (f.label != FrameLabel::kUnlabeled) any_label = true;

    bool payload_flag = false;
    const BankClusterEntry* entry = payload_bank.find_cluster(f.can_id);
    if (entry != nullptr) {
      auto origin_it =
          out.payload.cluster_origins.find(entry->cluster.cluster_id);
      if (origin_it != out.payload.cluster_origins.end() &&
          f.timestamp >= origin_it->second) {
        const auto idx = static_cast<std::int64_t>(std::floor(
            (f.timestamp - origin_it->second) / entry->window_seconds));
        auto flag_it = window_flag.find({entry->cluster.cluster_id, idx});
        payload_flag = flag_it != window_flag.end() && flag_it->second;
      }
    } else if (options.payload.unknown_id == UnknownIdPolicy::kFlag) {
      payload_flag = true;
    }

    const bool timing_flag = out.timing[i].flagged;
    out.frame_flags[i] = options.and_fusion ? (payload_flag && timing_flag)
                                            : (payload_flag || timing_flag);
  }

  if (any_label) {
    std::vector<bool> actual(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      actual[i] = frames[i].label == FrameLabel::kAttack;
    }
    MetricsReport frame_report;
    frame_report.unit = "frame";
    frame_report.counts = confusion(out.frame_flags, actual);
    frame_report.scalars = scalar_metrics(frame_report.counts);
    frame_report.meta["fusion"] = options.and_fusion ? "and" : "or";
    out.frame_report = std::move(frame_report);

    const WindowEval we =
        evaluate_payload_windows(frames, payload_bank, out.payload);
    if (!we.predicted.empty()) {
      MetricsReport window_report;
      window_report.unit = "window";
      window_report.counts = confusion(we.predicted, we.actual);
      window_report.scalars = scalar_metrics(window_report.counts);
      out.payload_window_report = std::move(window_report);
    }
  }
  return out;
}

WindowEval evaluate_payload_windows(std::span<const CanFrame> frames,
                                    const PayloadRuleBank& bank,
                                    const PayloadDetectionResult& result) {
  // Attack attribution per (cluster, window).
  std::set<std::pair<int, std::int64_t>> attacked;
  for (const CanFrame& f : frames) {
    if (f.label != FrameLabel::kAttack) continue;
    const BankClusterEntry* entry = bank.find_cluster(f.can_id);
    if (entry == nullptr) continue;
    auto origin_it = result.cluster_origins.find(entry->cluster.cluster_id);
    if (origin_it == result.cluster_origins.end()) continue;
    if (f.timestamp < origin_it->second) continue;
    const auto idx = static_cast<std::int64_t>(
        std::floor((f.timestamp - origin_it->second) / entry->window_seconds));
    attacked.insert({entry->cluster.cluster_id, idx});
  }

  WindowEval eval;
  for (const PayloadVerdict& v : result.verdicts) {
    if (v.window_index < 0) continue;
    eval.predicted.push_back(v.is_attack);
    eval.actual.push_back(attacked.count({v.cluster_id, v.window_index}) > 0);
    eval.scores.push_back(static_cast<double>(v.membership_anomalies.size() +
                                              v.violated_rules.size()));
  }
  return eval;
}

TrafficSpec default_traffic_spec(double duration, std::uint64_t seed) {
  TrafficSpec spec;
  spec.duration = duration;
  spec.seed = seed;

  IdTrafficSpec speed;
  speed.period = 0.1;
  speed.signals = {
      {"byte0", SignalGenSpec::Kind::kRandomWalk, 0, 128, 40, 3, 0, 255, "",
       1, 0},
      {"byte1", SignalGenSpec::Kind::kConstant, 10, 0, 0, 0, 0, 255, "", 1,
       0}};
  spec.ids[0x0A1] = speed;

  IdTrafficSpec mirror;
  mirror.period = 0.1;
  mirror.signals = {
      {"byte0", SignalGenSpec::Kind::kCorrelated, 0, 0, 0, 0, 0, 255,
       "0x0A1.byte0", -1.0, 255.0},
      {"byte1", SignalGenSpec::Kind::kConstant, 32, 0, 0, 0, 0, 255, "", 1,
       0}};
  spec.ids[0x0A2] = mirror;

  IdTrafficSpec status;
  status.period = 0.1;
  status.signals = {
      {"byte0", SignalGenSpec::Kind::kConstant, 0, 0, 0, 0, 0, 255, "", 1, 0},
      {"byte1", SignalGenSpec::Kind::kConstant, 255, 0, 0, 0, 0, 255, "", 1,
       0}};
  spec.ids[0x0B1] = status;

  IdTrafficSpec slow;
  slow.period = 0.5;
  slow.signals = {{"byte0", SignalGenSpec::Kind::kRandomWalk, 0, 100, 10, 1,
                   0, 255, "", 1, 0}};
  spec.ids[0x0C1] = slow;

  IdTrafficSpec wheel;
  wheel.period = 0.1;
  wheel.signals = {{"byte0", SignalGenSpec::Kind::kRandomWalk, 0, 64, 20, 2,
                    0, 255, "", 1, 0}};
  spec.ids[0x0E1] = wheel;

  return spec;
}

AttackSpec default_attack_spec(AttackKind kind, double duration) {
  AttackSpec attack;
  attack.kind = kind;
  attack.target_id = 0x0A1;
  attack.start = 0.4 * duration;
  attack.end = 0.7 * duration;
  attack.gap = kind == AttackKind::kDos ? 0.001 : 0.01;
  attack.override_byte = 0;
  attack.override_value = 0xFF;
  return attack;
}

std::string manifest_json(const PipelineManifest& manifest) {
  nlohmann::json doc;
  doc["schema_version"] = "athena-manifest-1";
  doc["seed"] = manifest.seed;
  doc["config_digest"] = manifest.config_digest;
  nlohmann::json outputs;
  for (const auto& [name, path] : manifest.outputs) outputs[name] = path;
  doc["outputs"] = std::move(outputs);
  nlohmann::json digests;
  for (const auto& [name, digest] : manifest.digests) digests[name] = digest;
  doc["digests"] = std::move(digests);
  return doc.dump(2) + "\n";
}

PipelineManifest run_pipeline(const PipelineConfig& config,
                              const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;

  PipelineManifest manifest;
  manifest.seed = config.traffic.seed;

  // Outputs are staged in memory and written only once every stage has
  // succeeded; a failed run leaves nothing behind.
  std::vector<std::pair<std::string, std::string>> staged;
  const auto emit = [&](const std::string& name, const std::string& filename,
                        const std::string& content) {
    staged.emplace_back(filename, content);
    manifest.outputs.emplace_back(name, filename);
    manifest.digests.emplace_back(name, digest_hex(fnv1a64(content)));
  };

  const std::string traffic_json = traffic_spec_json(config.traffic);
  const std::string attack_json = attack_spec_json(config.attack);
  manifest.config_digest = digest_hex(fnv1a64(traffic_json + attack_json));
  emit("traffic_spec", "traffic_spec.json", traffic_json);
  emit("attack_spec", "attack_spec.json", attack_json);

  const std::vector<CanFrame> benign = generate_benign(config.traffic);
  const std::string benign_text = to_candump(benign);
  emit("benign_log", "benign.log", benign_text);

  const std::vector<CanFrame> attacked =
      inject(benign, config.attack, config.traffic.seed ^ 0xA77ACCull);
  emit("attacked_log", "attacked.csv", to_labeled_csv(attacked));

  const SignalMap map;  // default per-byte signals

  MineOptions mine_options = config.mine;
  mine_options.seed = config.traffic.seed;
  MineReport mine_report;
  const PayloadRuleBank bank =
      mine_payload_bank(benign, benign, map, mine_options,
                        digest_hex(fnv1a64(benign_text)), &mine_report);
  emit("payload_bank", "payload_bank.json", serialize_rule_bank(bank));

  LstmConfig lstm = config.lstm;
  lstm.seed = config.traffic.seed;
  const TimeRuleBank time_bank =
      train_time_bank(benign, lstm, config.one_sided_time_rules);
  emit("time_bank", "time_bank.json", serialize_time_bank(time_bank));

  const DetectOutput detect =
      run_fused_detect(attacked, bank, time_bank, map, config.detect);
  emit("payload_verdicts", "payload_verdicts.csv",
       payload_verdicts_csv(detect.payload));
  emit("timing_verdicts", "timing_verdicts.csv",
       timing_verdicts_csv(detect.timing));
  if (detect.frame_report) {
    emit("report_frame", "report_frame.json",
         report_json(*detect.frame_report));
  }
  if (detect.payload_window_report) {
    emit("report_window", "report_window.json",
         report_json(*detect.payload_window_report));
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  for (const auto& [filename, content] : staged) {
    atomic_write_file(out_dir / filename, content);
  }
  atomic_write_file(out_dir / "manifest.json", manifest_json(manifest));
  return manifest;
}

}  // namespace athena
