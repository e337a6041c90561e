// Acceptance suite: runs every gate criterion end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any required criterion
// fails. The external-data sanity band (C12) is a soft check: it reports
// but never gates.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "athena/attack_sim.hpp"
#include "athena/errors.hpp"
#include "athena/gmm.hpp"
#include "athena/ingest.hpp"
#include "athena/lstm.hpp"
#include "athena/metrics.hpp"
#include "athena/payload_detector.hpp"
#include "athena/pipeline.hpp"
#include "athena/rules.hpp"
#include "athena/time_rules.hpp"
#include "athena/util.hpp"

#include "../oracles.hpp"

using namespace athena;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  bool soft = false;     // never gates the exit code
  bool skipped = false;
  std::string detail;
};

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// --- C1 / C2 / C3 -----------------------------------------------------------

Outcome c1_fp_growth_oracle() {
  const double t0 = now_seconds();
  Rng rng(0xC1);
  std::size_t checked_patterns = 0;
  for (int instance = 0; instance < 200; ++instance) {
    const int n_items = 2 + static_cast<int>(rng.below(11));  // <= 12
    const auto masks = oracle::random_transactions(rng, n_items, 200);
    const auto txns = oracle::to_transactions(masks, n_items);
    const std::size_t min_count = 1 + rng.below(1 + masks.size() / 4);

    const auto expected =
        oracle::brute_force_frequent(masks, n_items, min_count);
    const auto patterns = mine_frequent_patterns(txns, min_count);
    if (patterns.size() != expected.size()) {
      return {false, false, false,
              fmt("instance %d: %zu patterns vs %zu brute-force", instance,
                  patterns.size(), expected.size())};
    }
    for (const StatePattern& p : patterns) {
      const auto it = expected.find(oracle::mask_of_items(p.items));
      if (it == expected.end() || it->second != p.support_count) {
        return {false, false, false,
                fmt("instance %d: support mismatch", instance)};
      }
      ++checked_patterns;
    }
  }
  const double elapsed = now_seconds() - t0;
  if (elapsed >= 60.0) {
    return {false, false, false, fmt("took %.1fs (budget 60s)", elapsed)};
  }
  return {true, false, false,
          fmt("200 instances, %zu patterns, %.1fs", checked_patterns, elapsed)};
}

Outcome c2_rule_soundness() {
  const double t0 = now_seconds();
  Rng rng(0xC2);
  std::size_t total_rules = 0;
  for (int instance = 0; instance < 200; ++instance) {
    const int n_items = 2 + static_cast<int>(rng.below(11));
    const auto masks = oracle::random_transactions(rng, n_items, 200);
    const auto txns = oracle::to_transactions(masks, n_items);
    const double gamma = rng.uniform(0.5, 0.95);
    const double theta = rng.uniform(0.01, gamma * 0.5);

    MiningConfig config;
    config.gamma = gamma;
    config.theta = theta;
    config.max_pattern_size = 0;
    const auto patterns = mine_frequent_patterns(txns, 1);
    const auto rules = derive_rules(patterns, txns, config);
    total_rules += rules.size();

    for (const InvariantRule& rule : rules) {
      const oracle::Mask w = oracle::mask_of_items(rule.antecedent);
      const oracle::Mask m = oracle::mask_of_items(rule.consequent);
      const oracle::Mask z = w | m;
      if ((w & m) != 0u) return {false, false, false, "overlapping rule sides"};

      const std::size_t count_w = oracle::count_support(w, masks);
      const std::size_t count_z = oracle::count_support(z, masks);
      if (count_w != count_z || count_z != rule.support_count) {
        return {false, false, false, fmt("eq.7 violated at instance %d", instance)};
      }
      std::size_t min_item = masks.size();
      for (int bit = 0; bit < n_items; ++bit) {
        if (z & (1u << bit)) {
          min_item =
              std::min(min_item, oracle::count_support(1u << bit, masks));
        }
      }
      const double total = static_cast<double>(masks.size());
      const double sigma_z = static_cast<double>(count_z) / total;
      const double sigma_min = static_cast<double>(min_item) / total;
      if (!(sigma_z > gamma * sigma_min && sigma_z > theta)) {
        return {false, false, false, fmt("eq.8 violated at instance %d", instance)};
      }
      if (sigma_z > sigma_min + 1e-15) {
        return {false, false, false, fmt("eq.9 violated at instance %d", instance)};
      }
      for (const InvariantRule& other : rules) {
        if (oracle::dominated_by(rule, other)) {
          return {false, false, false,
                  fmt("dominated rule retained at instance %d", instance)};
        }
      }
    }
  }
  const double elapsed = now_seconds() - t0;
  if (elapsed >= 60.0) {
    return {false, false, false, fmt("took %.1fs (budget 60s)", elapsed)};
  }
  return {true, false, false,
          fmt("200 instances, %zu rules verified, %.1fs", total_rules, elapsed)};
}

Outcome c3_antimonotonicity() {
  Rng rng(0xC3);
  std::size_t coincidence_checks = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_items = 2 + static_cast<int>(rng.below(9));
    const auto masks = oracle::random_transactions(rng, n_items, 80);
    const oracle::Mask all = static_cast<oracle::Mask>((1u << n_items) - 1);
    const oracle::Mask w = static_cast<oracle::Mask>(rng.next_u64()) & all;
    const oracle::Mask m =
        static_cast<oracle::Mask>(w | (rng.next_u64() & all));
    const std::size_t sw = oracle::count_support(w, masks);
    const std::size_t sm = oracle::count_support(m, masks);
    if (sm > sw) return {false, false, false, "property 1 violated"};
    if (sm == sw) {
      ++coincidence_checks;
      if (oracle::tid_set(w, masks) != oracle::tid_set(m, masks)) {
        return {false, false, false, "property 2 violated"};
      }
    }
  }
  return {true, false, false,
          fmt("1000 pairs, %zu coincident-window checks", coincidence_checks)};
}

// --- C4 / C5 ----------------------------------------------------------------

Outcome c4_gmm_recovery() {
  const double t0 = now_seconds();
  int successes = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 7919);
    DeltaSeries d;
    d.can_id = 0x4E7;
    d.signal_name = "byte0";
    for (int i = 0; i < 500; ++i) {
      d.timestamps.push_back(0.1 * i);
      d.deltas.push_back(rng.gaussian(rng.coin() ? 10.0 : -10.0, 1.0));
    }
    const GmmModel selected = select_model(d, 5, seed);
    const bool k_two = selected.component_count == 2;
    bool recovered = false;
    if (k_two) {
      recovered = std::abs(selected.means[0] + 10.0) <= 0.5 &&
                  std::abs(selected.means[1] - 10.0) <= 0.5 &&
                  std::abs(selected.weights[0] - 0.5) <= 0.1 &&
                  std::abs(selected.weights[1] - 0.5) <= 0.1;
    }
    if (k_two && recovered) ++successes;
  }
  const double elapsed = now_seconds() - t0;
  if (elapsed >= 30.0) {
    return {false, false, false, fmt("took %.1fs (budget 30s)", elapsed)};
  }
  return {successes >= 18, false, false,
          fmt("%d/20 seeds recovered (need >= 18), %.1fs", successes, elapsed)};
}

Outcome c5_responsibility_consistency() {
  // Ranges bounded so the naive linear-space oracle cannot underflow.
  Rng rng(0xC5);
  for (int trial = 0; trial < 1000; ++trial) {
    GmmModel m;
    m.component_count = 1 + static_cast<int>(rng.below(5));
    double wsum = 0.0;
    for (int k = 0; k < m.component_count; ++k) {
      m.weights.push_back(rng.uniform(0.05, 1.0));
      wsum += m.weights.back();
      m.means.push_back(rng.uniform(-15.0, 15.0));
      m.stdevs.push_back(rng.uniform(1.0, 4.0));
      m.min_membership.push_back(0.5);
    }
    for (double& w : m.weights) w /= wsum;
    const double x = rng.uniform(-10.0, 10.0);

    const Responsibilities fast = responsibilities(m, x);
    double direct_total = 0.0;
    std::vector<double> direct;
    for (int k = 0; k < m.component_count; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const double z = (x - m.means[ku]) / m.stdevs[ku];
      direct.push_back(m.weights[ku] * std::exp(-0.5 * z * z) /
                       (m.stdevs[ku] * std::sqrt(2.0 * M_PI)));
      direct_total += direct.back();
    }
    double sum = 0.0;
    for (int k = 0; k < m.component_count; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      if (std::abs(fast.r[ku] - direct[ku] / direct_total) > 1e-9) {
        return {false, false, false, fmt("mismatch at trial %d", trial)};
      }
      sum += fast.r[ku];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      return {false, false, false, fmt("sum != 1 at trial %d", trial)};
    }
  }
  return {true, false, false, "1000 random (model, delta) pairs within 1e-9"};
}

// --- C6 ---------------------------------------------------------------------

Outcome c6_gradient_check() {
  const double t0 = now_seconds();
  LstmNetwork net = LstmNetwork::random_init(1, 3, 4, 0xC6);
  Rng rng(0xC6 ^ 0xFFFF);
  std::vector<double> seq{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0),
                          rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
  const double target = rng.uniform(0.0, 1.0);

  LstmNetwork::Cache cache;
  const double pred = net.forward_cached(seq, cache);
  std::vector<double> grad(net.parameter_count(), 0.0);
  net.backward(cache, 2.0 * (pred - target), grad);

  const double step = 1e-5;
  double worst = 0.0;
  std::vector<double>& params = net.mutable_parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = std::pow(net.forward(seq) - target, 2.0);
    params[i] = saved - step;
    const double down = std::pow(net.forward(seq) - target, 2.0);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max(1e-8, std::abs(grad[i]) + std::abs(numeric));
    worst = std::max(worst, std::abs(grad[i] - numeric) / denom);
  }
  const double elapsed = now_seconds() - t0;
  if (elapsed >= 10.0) {
    return {false, false, false, fmt("took %.1fs (budget 10s)", elapsed)};
  }
  return {worst <= 1e-4, false, false,
          fmt("max relative error %.2e over %zu parameters, %.1fs", worst,
              params.size(), elapsed)};
}

// --- C7 / C8 ----------------------------------------------------------------

TrafficSpec timing_trace_spec(double duration, std::uint64_t seed) {
  TrafficSpec spec;
  spec.duration = duration;
  spec.seed = seed;
  for (std::uint32_t id : {0x0A1u, 0x0B2u, 0x0C3u, 0x0D4u, 0x0E5u, 0x0F6u}) {
    IdTrafficSpec traffic;
    traffic.period = 0.1;
    traffic.jitter_std = 0.0;
    traffic.signals = {{"byte0", SignalGenSpec::Kind::kConstant,
                        static_cast<double>(id & 0xFF), 0, 0, 0, 0, 255, "",
                        1, 0}};
    spec.ids[id] = traffic;
  }
  return spec;
}

Outcome c7_timing_detection() {
  const double t0 = now_seconds();
  const TrafficSpec spec = timing_trace_spec(60.0, 0xC7);
  const std::vector<CanFrame> benign = generate_benign(spec);

  LstmConfig lstm;
  lstm.seed = 0xC7;
  const TimeRuleBank bank = train_time_bank(benign, lstm);
  if (bank.rules.size() != 6) {
    return {false, false, false, fmt("%zu time rules, expected 6", bank.rules.size())};
  }

  // fabrication flood on one id at a tenth of its period
  AttackSpec flood;
  flood.kind = AttackKind::kTargetedId;
  flood.target_id = 0x0A1;
  flood.start = 20.0;
  flood.end = 32.0;
  flood.gap = 0.01;
  const std::vector<CanFrame> attacked = inject(benign, flood, 0xC7);
  const std::vector<TimingVerdict> verdicts = detect_timing(attacked, bank);

  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
  for (std::size_t i = 0; i < attacked.size(); ++i) {
    const bool attack = attacked[i].label == FrameLabel::kAttack;
    const bool flagged = verdicts[i].flagged;
    if (attack && flagged) ++tp;
    if (attack && !flagged) ++fn;
    if (!attack && flagged) ++fp;
    if (!attack && !flagged) ++tn;
  }
  const double recall =
      static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double fpr = static_cast<double>(fp) / static_cast<double>(fp + tn);

  // suspension: the first frame after the silence must be flagged
  AttackSpec suspension;
  suspension.kind = AttackKind::kSuspension;
  suspension.target_id = 0x0A1;
  suspension.start = 40.0;
  suspension.end = 45.0;
  const std::vector<CanFrame> suspended = inject(benign, suspension, 0xC7);
  const std::vector<TimingVerdict> gap_verdicts = detect_timing(suspended, bank);
  bool gap_flagged = false;
  for (std::size_t i = 0; i < suspended.size(); ++i) {
    if (gap_verdicts[i].flagged && suspended[i].can_id == 0x0A1 &&
        suspended[i].timestamp >= 45.0) {
      gap_flagged = true;
      break;
    }
  }

  const double elapsed = now_seconds() - t0;
  const bool pass =
      recall >= 0.95 && fpr <= 0.05 && gap_flagged && elapsed < 300.0;
  return {pass, false, false,
          fmt("flood recall %.4f (>= 0.95), benign fpr %.4f (<= 0.05), "
              "suspension %s, %.0fs",
              recall, fpr, gap_flagged ? "flagged" : "MISSED", elapsed)};
}

Outcome c8_masquerade_division() {
  const double t0 = now_seconds();
  const TrafficSpec spec = default_traffic_spec(60.0, 0xC8);
  const std::vector<CanFrame> benign = generate_benign(spec);
  AttackSpec attack = default_attack_spec(AttackKind::kMasquerade, 60.0);
  const std::vector<CanFrame> attacked = inject(benign, attack, 0xC8);

  MineOptions mine_options;
  mine_options.seed = 0xC8;
  const PayloadRuleBank bank =
      mine_payload_bank(benign, benign, SignalMap{}, mine_options, "fnv1a:c8");
  LstmConfig lstm;
  lstm.seed = 0xC8;
  const TimeRuleBank time_bank = train_time_bank(benign, lstm);

  const DetectOutput out =
      run_fused_detect(attacked, bank, time_bank, SignalMap{});

  std::size_t timing_flags = 0;
  for (const TimingVerdict& v : out.timing) timing_flags += v.flagged ? 1 : 0;

  if (!out.payload_window_report.has_value()) {
    return {false, false, false, "no window-level report produced"};
  }
  const double recall = out.payload_window_report->scalars.recall;
  const double precision = out.payload_window_report->scalars.precision;
  const double elapsed = now_seconds() - t0;
  const bool pass = timing_flags == 0 && recall >= 0.8 && precision >= 0.8 &&
                    elapsed < 300.0;
  return {pass, false, false,
          fmt("timing flags %zu (= 0), window recall %.4f (>= 0.8), "
              "precision %.4f (>= 0.8), %.0fs",
              timing_flags, recall, precision, elapsed)};
}

// --- C9 ---------------------------------------------------------------------

bool planted_rule_recovered(const PayloadRuleBank& bank) {
  const GmmModel* mirror = bank.find_model(0x0A2, "byte0");
  if (bank.find_model(0x0A1, "byte0") == nullptr || mirror == nullptr) {
    return false;
  }
  const StateItem antecedent{0x0A1, "byte0", 1};
  const StateItem wanted{0x0A2, "byte0", mirror->component_count};
  for (const InvariantRule& rule : bank.rules) {
    if (rule.antecedent.size() == 1 && rule.antecedent[0] == antecedent) {
      for (const StateItem& item : rule.consequent) {
        if (item == wanted) return true;
      }
    }
  }
  return false;
}

Outcome c9_planted_rule() {
  int successes = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const TrafficSpec spec = default_traffic_spec(20.0, seed * 101);
    const std::vector<CanFrame> benign = generate_benign(spec);
    MineOptions options;
    options.seed = seed;
    const PayloadRuleBank bank =
        mine_payload_bank(benign, benign, SignalMap{}, options, "fnv1a:c9");
    if (planted_rule_recovered(bank)) ++successes;
  }
  return {successes >= 18, false, false,
          fmt("%d/20 seeds recovered the planted invariant (need >= 18)",
              successes)};
}

// --- C10 --------------------------------------------------------------------

Outcome c10_metrics_oracle() {
  const ScalarMetrics balanced = scalar_metrics({1, 1, 1, 1});
  if (balanced.accuracy != 0.5 || balanced.precision != 0.5 ||
      balanced.recall != 0.5 || balanced.f1 != 0.5) {
    return {false, false, false, "balanced case is not 0.5 everywhere"};
  }
  const ScalarMetrics hand = scalar_metrics({98, 4, 9500, 2});
  if (std::abs(hand.recall - 0.98) > 1e-12 ||
      std::abs(hand.precision - 98.0 / 102.0) > 1e-12) {
    return {false, false, false, "hand-computed case mismatch"};
  }

  Rng rng(0xC10);
  for (int instance = 0; instance < 100; ++instance) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> scores;
    std::vector<bool> actual;
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(std::round(rng.uniform(0.0, 10.0)) / 10.0);
      actual.push_back(rng.coin());
      (actual.back() ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) {
      actual[0] = true;
      actual[1] = false;
    }
    const RocResult roc = roc_auc(scores, actual);
    const double brute = oracle::pairwise_auc(scores, actual);
    if (std::abs(roc.auc - brute) > 1e-12) {
      return {false, false, false,
              fmt("auc %.12f vs brute force %.12f", roc.auc, brute)};
    }
  }
  return {true, false, false, "100 auc instances + hand values match"};
}

// --- C11 --------------------------------------------------------------------

Outcome c11_determinism() {
  const fs::path dir_a = fs::temp_directory_path() / "athena_acc_run_a";
  const fs::path dir_b = fs::temp_directory_path() / "athena_acc_run_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  PipelineConfig config;
  config.traffic = default_traffic_spec(10.0, 0xC11);
  config.attack = default_attack_spec(AttackKind::kMasquerade, 10.0);
  const PipelineManifest ma = run_pipeline(config, dir_a);
  const PipelineManifest mb = run_pipeline(config, dir_b);

  if (manifest_json(ma) != manifest_json(mb)) {
    return {false, false, false, "manifests differ between reruns"};
  }
  for (const auto& [name, path] : ma.outputs) {
    if (read_file(dir_a / path) != read_file(dir_b / path)) {
      return {false, false, false, name + " differs between reruns"};
    }
  }

  // save -> load -> save is lossless
  const std::string bank_bytes = read_file(dir_a / "payload_bank.json");
  const PayloadRuleBank bank = load_rule_bank(bank_bytes);
  if (serialize_rule_bank(bank) != bank_bytes) {
    return {false, false, false, "payload bank round trip not lossless"};
  }
  const std::string time_bytes = read_file(dir_a / "time_bank.json");
  const TimeRuleBank time_bank = load_time_bank(time_bytes);
  if (serialize_time_bank(time_bank) != time_bytes) {
    return {false, false, false, "time bank round trip not lossless"};
  }

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  return {true, false, false,
          fmt("%zu artifacts byte-identical; both banks round trip",
              ma.outputs.size())};
}

// --- C12 (optional external data) -------------------------------------------

Outcome c12_road_sanity() {
  const char* road_env = std::getenv("ATHENA_ROAD_DIR");
  if (road_env == nullptr || *road_env == '\0') {
    return {true, true, true,
            "ATHENA_ROAD_DIR not set; external sanity band skipped"};
  }
  const fs::path road(road_env);
  if (!fs::exists(road / "train.log")) {
    return {true, true, true, "train.log missing under ATHENA_ROAD_DIR"};
  }
  const std::vector<CanFrame> train = load_frames(road / "train.log");
  LstmConfig lstm;
  lstm.seed = 0xC12;
  const TimeRuleBank bank = train_time_bank(train, lstm);

  std::string detail;
  bool all_pass = true;
  int evaluated = 0;
  for (const auto& entry : fs::directory_iterator(road)) {
    if (entry.path().extension() != ".csv") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.find("masquerade") != std::string::npos) continue;
    const std::vector<CanFrame> frames = load_frames(entry.path());
    const std::vector<TimingVerdict> verdicts = detect_timing(frames, bank);
    std::vector<double> scores;
    std::vector<bool> actual;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      scores.push_back(verdicts[i].score);
      actual.push_back(frames[i].label == FrameLabel::kAttack);
    }
    try {
      const RocResult roc = roc_auc(scores, actual);
      ++evaluated;
      detail += fmt("%s auc=%.3f ", stem.c_str(), roc.auc);
      if (roc.auc < 0.90) all_pass = false;
    } catch (const Error&) {
      detail += stem + " single-class ";
    }
  }
  if (evaluated == 0) {
    return {true, true, true, "no non-masquerade labeled CSVs found"};
  }
  return {all_pass, true, false, detail + "(soft band: auc >= 0.90)"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"C1 fp-growth-oracle-equivalence", c1_fp_growth_oracle},
      {"C2 rule-principle-soundness", c2_rule_soundness},
      {"C3 antimonotonicity-and-coincident-windows", c3_antimonotonicity},
      {"C4 gmm-recovery-and-bic-selection", c4_gmm_recovery},
      {"C5 responsibility-consistency", c5_responsibility_consistency},
      {"C6 lstm-gradient-check", c6_gradient_check},
      {"C7 timing-detection-synthetic", c7_timing_detection},
      {"C8 masquerade-division-of-labor", c8_masquerade_division},
      {"C9 planted-rule-recoverability", c9_planted_rule},
      {"C10 metrics-oracle", c10_metrics_oracle},
      {"C11 determinism-and-round-trip", c11_determinism},
      {"C12 external-data-sanity-band", c12_road_sanity},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome = {false, false, false, std::string("exception: ") + e.what()};
    }
    const char* tag = outcome.skipped ? "SKIP"
                      : outcome.pass  ? "PASS"
                      : outcome.soft  ? "SOFT-FAIL"
                                      : "FAIL";
    std::printf("[%s] %s: %s\n", tag, criterion.name, outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass && !outcome.soft) ++failures;
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all required criteria passed\n");
  return 0;
}
