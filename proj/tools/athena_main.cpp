// athena: two-bank CAN intrusion detection toolkit.
//
// Cloud role:    mine            (payload rule bank from a benign log)
// Vehicle role:  train-time      (time rule bank from a benign log)
//                detect-payload / detect-time / detect (fused)
// Tooling:       simulate, inject, evaluate, pipeline

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "athena/attack_sim.hpp"
#include "athena/errors.hpp"
#include "athena/ingest.hpp"
#include "athena/metrics.hpp"
#include "athena/payload_detector.hpp"
#include "athena/pipeline.hpp"
#include "athena/rules.hpp"
#include "athena/time_rules.hpp"
#include "athena/util.hpp"

namespace {

using namespace athena;

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("ATHENA_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  return std::strtoull(raw, nullptr, 10);
}

SignalMap load_map_or_default(const std::string& path) {
  if (path.empty()) return SignalMap{};
  return load_signal_map(path);
}

void print_report(const MetricsReport& report) {
  std::printf("[%s] tp=%zu fp=%zu tn=%zu fn=%zu\n", report.unit.c_str(),
              report.counts.tp, report.counts.fp, report.counts.tn,
              report.counts.fn);
  std::printf("[%s] accuracy=%.4f precision=%.4f recall=%.4f f1=%.4f\n",
              report.unit.c_str(), report.scalars.accuracy,
              report.scalars.precision, report.scalars.recall,
              report.scalars.f1);
  if (report.roc) {
    std::printf("[%s] auc=%.4f\n", report.unit.c_str(), report.roc->auc);
  }
}

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "dos") return AttackKind::kDos;
  if (name == "fuzzing") return AttackKind::kFuzzing;
  if (name == "targeted_id") return AttackKind::kTargetedId;
  if (name == "suspension") return AttackKind::kSuspension;
  if (name == "masquerade") return AttackKind::kMasquerade;
  raise(Errc::kInvalidSpec, "unknown attack kind '" + name + "'");
}

struct MineFlags {
  std::string train, validate, signal_map, out, bic_dump_path;
  double gamma = 0.9, theta = 0.05;
  bool grid = false;
  int k_max = 5;
  std::uint64_t seed = 0;
  double fixed_window = 0.0;
  double cluster_tol = 0.15;
  std::size_t max_pattern = 4;
  std::size_t count_slack = 0;
  bool linear_penalties = false;
  double lambda_t = 1000.0, lambda_e = 1000.0, delta_t = 1e-4, delta_e = 0.01;
};

int cmd_mine(const MineFlags& flags) {
  const std::string train_text = read_file(flags.train);
  const std::vector<CanFrame> train = parse_frames(train_text);
  std::vector<CanFrame> validation;
  if (!flags.validate.empty()) validation = load_frames(flags.validate);
  const SignalMap map = load_map_or_default(flags.signal_map);

  MineOptions options;
  options.mining.gamma = flags.gamma;
  options.mining.theta = flags.theta;
  options.mining.max_pattern_size = flags.max_pattern;
  options.mining.count_slack = flags.count_slack;
  options.mining.hinge_penalties = !flags.linear_penalties;
  options.mining.lambda_t = flags.lambda_t;
  options.mining.lambda_e = flags.lambda_e;
  options.mining.delta_t = flags.delta_t;
  options.mining.delta_e = flags.delta_e;
  if (flags.fixed_window > 0.0) {
    options.mining.window_policy = WindowPolicy::kFixed;
    options.mining.fixed_window = flags.fixed_window;
  }
  options.k_max = flags.k_max;
  options.seed = env_seed().value_or(flags.seed);
  options.cluster_tolerance = flags.cluster_tol;
  if (flags.grid) options.grid = default_grid();

  MineReport report;
  const PayloadRuleBank bank =
      mine_payload_bank(train, validation, map, options,
                        digest_hex(fnv1a64(train_text)), &report);

  if (!flags.bic_dump_path.empty()) {
    atomic_write_file(flags.bic_dump_path,
                      bic_dump_csv(bic_dump(train, map, options)));
  }
  atomic_write_file(flags.out, serialize_rule_bank(bank));

  std::printf("payload bank: %zu clusters, %zu models, %zu rules -> %s\n",
              bank.clusters.size(), bank.models.size(), bank.rules.size(),
              flags.out.c_str());
  for (const BankClusterEntry& c : bank.clusters) {
    std::string ids;
    for (std::uint32_t id : c.cluster.member_ids) {
      if (!ids.empty()) ids += ' ';
      ids += hex_id(id);
    }
    std::printf(
        "  cluster %d: period=%.6fs window=%.6fs windows=%zu ids=[%s]\n",
        c.cluster.cluster_id, c.cluster.representative_period,
        c.window_seconds, c.n_windows, ids.c_str());
  }
  for (const PeriodSkip& skip : report.skipped_ids) {
    std::printf("  skipped %s (%s)\n", hex_id(skip.can_id).c_str(),
                skip.reason == PeriodSkipReason::kTooFewFrames
                    ? "fewer than 2 frames"
                    : "zero median interval");
  }
  if (flags.grid) {
    std::printf(
        "  grid search (gamma, theta, rules, mean_check_s, err, objective):\n");
    for (const GridPointStats& s : report.grid_table) {
      std::printf("    %.2f %.2f %6zu %.3e %.4f %.3f\n", s.gamma, s.theta,
                  s.rule_count, s.mean_check_seconds, s.validation_error,
                  s.objective);
    }
    std::printf("  chosen gamma=%.2f theta=%.2f\n", report.chosen_gamma,
                report.chosen_theta);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ATHENA two-bank CAN intrusion detection"};
  app.require_subcommand(1);

  // --- simulate ---
  std::string sim_spec, sim_out;
  std::uint64_t sim_seed = 0;
  auto* simulate =
      app.add_subcommand("simulate", "generate benign CAN traffic");
  simulate->add_option("--spec", sim_spec, "traffic spec JSON")->required();
  simulate->add_option("--out", sim_out, "output candump log")->required();
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed);

  // --- inject ---
  std::string inj_in, inj_attack, inj_out;
  std::uint64_t inj_seed = 1;
  auto* inject_cmd = app.add_subcommand("inject", "inject a labeled attack");
  inject_cmd->add_option("--in", inj_in, "benign log")->required();
  inject_cmd->add_option("--attack", inj_attack, "attack spec JSON")
      ->required();
  inject_cmd->add_option("--out", inj_out, "labeled CSV out")->required();
  inject_cmd->add_option("--seed", inj_seed);

  // --- mine ---
  MineFlags mine_flags;
  auto* mine =
      app.add_subcommand("mine", "mine the payload rule bank (cloud role)");
  mine->add_option("--train", mine_flags.train)->required();
  mine->add_option("--validate", mine_flags.validate);
  mine->add_option("--signal-map", mine_flags.signal_map);
  mine->add_option("--out", mine_flags.out)->required();
  mine->add_option("--gamma", mine_flags.gamma);
  mine->add_option("--theta", mine_flags.theta);
  mine->add_flag("--grid", mine_flags.grid,
                 "search (gamma, theta) over the default grid");
  mine->add_option("--kmax", mine_flags.k_max);
  mine->add_option("--seed", mine_flags.seed);
  mine->add_option("--window", mine_flags.fixed_window,
                   "fixed window seconds (default: cluster period)");
  mine->add_option("--cluster-tol", mine_flags.cluster_tol);
  mine->add_option("--max-pattern", mine_flags.max_pattern);
  mine->add_option("--count-slack", mine_flags.count_slack);
  mine->add_flag("--linear-penalties", mine_flags.linear_penalties);
  mine->add_option("--lambda-t", mine_flags.lambda_t);
  mine->add_option("--lambda-e", mine_flags.lambda_e);
  mine->add_option("--delta-t", mine_flags.delta_t);
  mine->add_option("--delta-e", mine_flags.delta_e);
  mine->add_option("--bic-dump", mine_flags.bic_dump_path,
                   "per-candidate BIC table CSV");

  // --- train-time ---
  std::string tt_log, tt_out;
  LstmConfig tt_config;
  bool tt_one_sided = false;
  auto* train_time = app.add_subcommand(
      "train-time", "train the time rule bank (vehicle role)");
  train_time->add_option("--log", tt_log)->required();
  train_time->add_option("--out", tt_out)->required();
  train_time->add_option("--window", tt_config.window);
  train_time->add_option("--epochs", tt_config.epochs);
  train_time->add_option("--hidden", tt_config.hidden);
  train_time->add_option("--layers", tt_config.layers);
  train_time->add_option("--batch", tt_config.batch);
  train_time->add_option("--lr", tt_config.learning_rate);
  train_time->add_option("--seed", tt_config.seed);
  train_time->add_flag("--one-sided", tt_one_sided,
                       "lower bound only (literal rule)");

  // --- detect-payload ---
  std::string dp_bank, dp_log, dp_map, dp_out, dp_report,
      dp_policy = "ignore";
  bool dp_no_fallback = false;
  double dp_margin = 0.0;
  auto* detect_payload =
      app.add_subcommand("detect-payload", "payload detector");
  detect_payload->add_option("--bank", dp_bank)->required();
  detect_payload->add_option("--log", dp_log)->required();
  detect_payload->add_option("--signal-map", dp_map);
  detect_payload->add_option("--out", dp_out)->required();
  detect_payload->add_option("--policy", dp_policy,
                             "unknown-id policy: ignore|flag");
  detect_payload->add_flag("--no-density-fallback", dp_no_fallback);
  detect_payload->add_option("--density-margin", dp_margin);
  detect_payload->add_option("--report", dp_report,
                             "window-level metrics JSON (labeled logs)");

  // --- detect-time ---
  std::string dt_bank, dt_log, dt_out, dt_report, dt_roc;
  auto* detect_time = app.add_subcommand("detect-time", "timing detector");
  detect_time->add_option("--bank", dt_bank)->required();
  detect_time->add_option("--log", dt_log)->required();
  detect_time->add_option("--out", dt_out)->required();
  detect_time->add_option("--report", dt_report,
                          "frame-level metrics JSON (labeled logs)");
  detect_time->add_option("--roc-csv", dt_roc);

  // --- detect (fused) ---
  std::string d_pbank, d_tbank, d_log, d_map, d_outdir, d_fusion = "or",
                                                        d_policy = "ignore";
  auto* detect = app.add_subcommand("detect", "fused two-bank detector");
  detect->add_option("--payload-bank", d_pbank)->required();
  detect->add_option("--time-bank", d_tbank)->required();
  detect->add_option("--log", d_log)->required();
  detect->add_option("--signal-map", d_map);
  detect->add_option("--out-dir", d_outdir)->required();
  detect->add_option("--fusion", d_fusion, "or|and");
  detect->add_option("--policy", d_policy, "unknown-id policy: ignore|flag");

  // --- evaluate ---
  std::string ev_log, ev_pbank, ev_tbank, ev_map, ev_out, ev_roc;
  auto* evaluate =
      app.add_subcommand("evaluate", "score detectors against labels");
  evaluate->add_option("--log", ev_log)->required();
  evaluate->add_option("--payload-bank", ev_pbank);
  evaluate->add_option("--time-bank", ev_tbank);
  evaluate->add_option("--signal-map", ev_map);
  evaluate->add_option("--out", ev_out)->required();
  evaluate->add_option("--roc-csv", ev_roc);

  // --- pipeline ---
  std::string pl_outdir, pl_spec, pl_attack = "masquerade", pl_road;
  std::uint64_t pl_seed = 42;
  double pl_duration = 20.0;
  bool pl_grid = false, pl_one_sided = false;
  auto* pipeline = app.add_subcommand(
      "pipeline", "simulate -> inject -> mine -> train -> detect -> evaluate");
  pipeline->add_option("--out-dir", pl_outdir)->required();
  pipeline->add_option("--spec", pl_spec,
                       "traffic spec JSON (default: built-in)");
  pipeline->add_option("--attack", pl_attack,
                       "attack kind or attack spec JSON path");
  pipeline->add_option("--seed", pl_seed);
  pipeline->add_option("--duration", pl_duration);
  pipeline->add_flag("--grid", pl_grid);
  pipeline->add_flag("--one-sided", pl_one_sided);
  pipeline->add_option(
      "--road", pl_road,
      "external data directory (candump train.log + labeled CSVs)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      TrafficSpec spec = parse_traffic_spec_json(read_file(sim_spec));
      if (sim_seed_opt->count() > 0) spec.seed = sim_seed;
      if (auto seed = env_seed()) spec.seed = *seed;
      const std::vector<CanFrame> frames = generate_benign(spec);
      atomic_write_file(sim_out, to_candump(frames));
      std::printf("%zu frames -> %s\n", frames.size(), sim_out.c_str());
    } else if (*inject_cmd) {
      const std::vector<CanFrame> frames = load_frames(inj_in);
      const AttackSpec attack = parse_attack_spec_json(read_file(inj_attack));
      const std::vector<CanFrame> attacked =
          inject(frames, attack, env_seed().value_or(inj_seed));
      atomic_write_file(inj_out, to_labeled_csv(attacked));
      std::size_t n_attack = 0;
      for (const CanFrame& f : attacked) {
        n_attack += f.label == FrameLabel::kAttack ? 1 : 0;
      }
      std::printf("%zu frames (%zu attack-labeled) -> %s\n", attacked.size(),
                  n_attack, inj_out.c_str());
    } else if (*mine) {
      return cmd_mine(mine_flags);
    } else if (*train_time) {
      const std::vector<CanFrame> frames = load_frames(tt_log);
      tt_config.seed = env_seed().value_or(tt_config.seed);
      TimeTrainReport report;
      const TimeRuleBank bank =
          train_time_bank(frames, tt_config, tt_one_sided, &report);
      atomic_write_file(tt_out, serialize_time_bank(bank));
      std::printf("time bank: %zu rules -> %s\n", bank.rules.size(),
                  tt_out.c_str());
      for (const TimeRule& r : bank.rules) {
        std::printf("  %s: [%.6f, %s] s (residual_std=%.6f)\n",
                    hex_id(r.can_id).c_str(), r.lower_bound,
                    std::isfinite(r.upper_bound)
                        ? format_seconds(r.upper_bound).c_str()
                        : "inf",
                    r.residual_std);
      }
      for (std::uint32_t id : report.skipped_too_few) {
        std::printf("  skipped %s (fewer than 2 frames)\n",
                    hex_id(id).c_str());
      }
      for (std::uint32_t id : report.skipped_insufficient) {
        std::printf("  skipped %s (not enough intervals for one window)\n",
                    hex_id(id).c_str());
      }
    } else if (*detect_payload) {
      const PayloadRuleBank bank = load_rule_bank(read_file(dp_bank));
      const std::vector<CanFrame> frames = load_frames(dp_log);
      const SignalMap map = load_map_or_default(dp_map);
      DetectorOptions options;
      options.density_fallback = !dp_no_fallback;
      options.density_margin = dp_margin;
      options.unknown_id = dp_policy == "flag" ? UnknownIdPolicy::kFlag
                                               : UnknownIdPolicy::kIgnore;
      const PayloadDetectionResult result =
          detect_payload_stream(frames, bank, map, options);
      atomic_write_file(dp_out, payload_verdicts_csv(result));
      std::size_t flagged = 0;
      for (const PayloadVerdict& v : result.verdicts) {
        flagged += v.is_attack ? 1 : 0;
      }
      std::printf("%zu windows, %zu flagged -> %s\n", result.verdicts.size(),
                  flagged, dp_out.c_str());
      if (!dp_report.empty()) {
        const WindowEval we = evaluate_payload_windows(frames, bank, result);
        bool any_label = false;
        for (const CanFrame& f : frames) {
          if (f.label != FrameLabel::kUnlabeled) any_label = true;
        }
        if (!any_label || we.predicted.empty()) {
          std::printf("no labeled windows; report skipped\n");
        } else {
          MetricsReport report;
          report.unit = "window";
          report.counts = confusion(we.predicted, we.actual);
          report.scalars = scalar_metrics(report.counts);
          emit_report(report, dp_report);
          print_report(report);
        }
      }
    } else if (*detect_time) {
      const TimeRuleBank bank = load_time_bank(read_file(dt_bank));
      const std::vector<CanFrame> frames = load_frames(dt_log);
      const std::vector<TimingVerdict> verdicts = detect_timing(frames, bank);
      atomic_write_file(dt_out, timing_verdicts_csv(verdicts));
      std::size_t flagged = 0;
      for (const TimingVerdict& v : verdicts) flagged += v.flagged ? 1 : 0;
      std::printf("%zu frames, %zu flagged -> %s\n", verdicts.size(), flagged,
                  dt_out.c_str());
      if (!dt_report.empty()) {
        bool any_label = false;
        std::vector<bool> predicted, actual;
        std::vector<double> scores;
        for (std::size_t i = 0; i < frames.size(); ++i) {
          if (frames[i].label != FrameLabel::kUnlabeled) any_label = true;
          predicted.push_back(verdicts[i].flagged);
          actual.push_back(frames[i].label == FrameLabel::kAttack);
          scores.push_back(verdicts[i].score);
        }
        if (!any_label) {
          std::printf("log is unlabeled; report skipped\n");
        } else {
          MetricsReport report;
          report.unit = "frame";
          report.counts = confusion(predicted, actual);
          report.scalars = scalar_metrics(report.counts);
          try {
            report.roc = roc_auc(scores, actual);
          } catch (const Error&) {
            // single-class log: no ROC
          }
          emit_report(report, dt_report,
                      dt_roc.empty()
                          ? std::nullopt
                          : std::optional<std::filesystem::path>(dt_roc));
          print_report(report);
        }
      }
    } else if (*detect) {
      const PayloadRuleBank pbank = load_rule_bank(read_file(d_pbank));
      const TimeRuleBank tbank = load_time_bank(read_file(d_tbank));
      const std::vector<CanFrame> frames = load_frames(d_log);
      const SignalMap map = load_map_or_default(d_map);
      FusedDetectOptions options;
      options.and_fusion = d_fusion == "and";
      options.payload.unknown_id = d_policy == "flag"
                                       ? UnknownIdPolicy::kFlag
                                       : UnknownIdPolicy::kIgnore;
      const DetectOutput out =
          run_fused_detect(frames, pbank, tbank, map, options);
      const std::filesystem::path dir(d_outdir);
      std::filesystem::create_directories(dir);
      atomic_write_file(dir / "payload_verdicts.csv",
                        payload_verdicts_csv(out.payload));
      atomic_write_file(dir / "timing_verdicts.csv",
                        timing_verdicts_csv(out.timing));
      std::size_t fused = 0;
      for (bool b : out.frame_flags) fused += b ? 1 : 0;
      std::printf("%zu frames, %zu fused flags (%s fusion)\n", frames.size(),
                  fused, options.and_fusion ? "and" : "or");
      if (out.frame_report) {
        emit_report(*out.frame_report, dir / "report_frame.json");
        print_report(*out.frame_report);
      }
      if (out.payload_window_report) {
        emit_report(*out.payload_window_report, dir / "report_window.json");
        print_report(*out.payload_window_report);
      }
    } else if (*evaluate) {
      const std::vector<CanFrame> frames = load_frames(ev_log);
      bool any_label = false;
      for (const CanFrame& f : frames) {
        if (f.label != FrameLabel::kUnlabeled) any_label = true;
      }
      if (!any_label) raise(Errc::kEmptyInput, "log carries no labels");
      const SignalMap map = load_map_or_default(ev_map);
      if (!ev_pbank.empty() && !ev_tbank.empty()) {
        const PayloadRuleBank pbank = load_rule_bank(read_file(ev_pbank));
        const TimeRuleBank tbank = load_time_bank(read_file(ev_tbank));
        const DetectOutput out =
            run_fused_detect(frames, pbank, tbank, map, {});
        emit_report(*out.frame_report, ev_out);
        print_report(*out.frame_report);
      } else if (!ev_tbank.empty()) {
        const TimeRuleBank tbank = load_time_bank(read_file(ev_tbank));
        const std::vector<TimingVerdict> verdicts =
            detect_timing(frames, tbank);
        std::vector<bool> predicted, actual;
        std::vector<double> scores;
        for (std::size_t i = 0; i < frames.size(); ++i) {
          predicted.push_back(verdicts[i].flagged);
          actual.push_back(frames[i].label == FrameLabel::kAttack);
          scores.push_back(verdicts[i].score);
        }
        MetricsReport report;
        report.unit = "frame";
        report.counts = confusion(predicted, actual);
        report.scalars = scalar_metrics(report.counts);
        try {
          report.roc = roc_auc(scores, actual);
        } catch (const Error&) {
        }
        emit_report(report, ev_out,
                    ev_roc.empty()
                        ? std::nullopt
                        : std::optional<std::filesystem::path>(ev_roc));
        print_report(report);
      } else if (!ev_pbank.empty()) {
        const PayloadRuleBank pbank = load_rule_bank(read_file(ev_pbank));
        const PayloadDetectionResult result =
            detect_payload_stream(frames, pbank, map, {});
        const WindowEval we = evaluate_payload_windows(frames, pbank, result);
        MetricsReport report;
        report.unit = "window";
        report.counts = confusion(we.predicted, we.actual);
        report.scalars = scalar_metrics(report.counts);
        try {
          report.roc = roc_auc(we.scores, we.actual);
        } catch (const Error&) {
        }
        emit_report(report, ev_out,
                    ev_roc.empty()
                        ? std::nullopt
                        : std::optional<std::filesystem::path>(ev_roc));
        print_report(report);
      } else {
        raise(Errc::kInvalidSpec,
              "evaluate needs --payload-bank and/or --time-bank");
      }
    } else if (*pipeline) {
      PipelineConfig config;
      const std::uint64_t seed = env_seed().value_or(pl_seed);
      config.traffic = pl_spec.empty()
                           ? default_traffic_spec(pl_duration, seed)
                           : parse_traffic_spec_json(read_file(pl_spec));
      if (!pl_spec.empty()) config.traffic.seed = seed;
      if (pl_attack.size() > 5 &&
          pl_attack.substr(pl_attack.size() - 5) == ".json") {
        config.attack = parse_attack_spec_json(read_file(pl_attack));
      } else {
        config.attack = default_attack_spec(parse_attack_kind(pl_attack),
                                            config.traffic.duration);
      }
      if (pl_grid) config.mine.grid = default_grid();
      config.one_sided_time_rules = pl_one_sided;

      if (!pl_road.empty()) {
        // Same pipeline on external logs: train on <road>/train.log, detect
        // and score every labeled CSV next to it.
        namespace fs = std::filesystem;
        const fs::path road(pl_road);
        const std::vector<CanFrame> train = load_frames(road / "train.log");
        const SignalMap map;
        MineOptions mine_options = config.mine;
        mine_options.seed = seed;
        const PayloadRuleBank bank = mine_payload_bank(
            train, train, map, mine_options, "fnv1a:external", nullptr);
        LstmConfig lstm = config.lstm;
        lstm.seed = seed;
        const TimeRuleBank tbank =
            train_time_bank(train, lstm, config.one_sided_time_rules);
        const fs::path out_dir(pl_outdir);
        fs::create_directories(out_dir);
        atomic_write_file(out_dir / "payload_bank.json",
                          serialize_rule_bank(bank));
        atomic_write_file(out_dir / "time_bank.json",
                          serialize_time_bank(tbank));
        for (const auto& entry : fs::directory_iterator(road)) {
          if (entry.path().extension() != ".csv") continue;
          const std::vector<CanFrame> attack_log = load_frames(entry.path());
          const DetectOutput out =
              run_fused_detect(attack_log, bank, tbank, map, config.detect);
          const std::string stem = entry.path().stem().string();
          if (out.frame_report) {
            emit_report(*out.frame_report, out_dir / (stem + "_report.json"));
            std::printf("%s:\n", stem.c_str());
            print_report(*out.frame_report);
          }
        }
        return 0;
      }

      const PipelineManifest manifest = run_pipeline(config, pl_outdir);
      std::printf("pipeline complete: %zu artifacts under %s (config %s)\n",
                  manifest.outputs.size(), pl_outdir.c_str(),
                  manifest.config_digest.c_str());
      for (const auto& [name, path] : manifest.outputs) {
        std::printf("  %-16s %s\n", name.c_str(), path.c_str());
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
