#include "athena/time_rules.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "athena/errors.hpp"
#include "athena/util.hpp"

namespace athena {

namespace {

// Sub-resolution guard for band comparisons: timestamps carry microseconds,
// so a nanosecond slop cannot admit a real violation.
constexpr double kBandEpsilon = 1e-9;

using nlohmann::json;

}  // namespace

bool IntervalSeries::degenerate() const {
  return norm_max - norm_min <= kBandEpsilon;
}

double IntervalSeries::scale() const {
  return degenerate() ? 0.0 : norm_max - norm_min;
}

double IntervalSeries::normalize(double v) const {
  if (degenerate()) return 0.5;
  const double x = (v - norm_min) / (norm_max - norm_min);
  return std::clamp(x, 0.0, 1.0);
}

double IntervalSeries::denormalize(double x) const {
  if (degenerate()) return norm_min;
  return norm_min + x * (norm_max - norm_min);
}

std::vector<double> IntervalSeries::normalized() const {
  std::vector<double> out;
  out.reserve(intervals.size());
  for (double v : intervals) out.push_back(normalize(v));
  return out;
}

IntervalSeries build_interval_series(std::uint32_t can_id,
                                     std::span<const double> timestamps) {
  if (timestamps.size() < 2) {
    raise(Errc::kTooFewFrames,
          "fewer than 2 frames for id " + hex_id(can_id));
  }
  IntervalSeries series;
  series.can_id = can_id;
  series.intervals.reserve(timestamps.size() - 1);
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    series.intervals.push_back(timestamps[i] - timestamps[i - 1]);
  }
  series.norm_min =
      *std::min_element(series.intervals.begin(), series.intervals.end());
  series.norm_max =
      *std::max_element(series.intervals.begin(), series.intervals.end());
  return series;
}

IntervalBuildResult build_intervals(std::span<const CanFrame> frames) {
  std::map<std::uint32_t, std::vector<double>> by_id;
  for (const CanFrame& f : frames) by_id[f.can_id].push_back(f.timestamp);

  IntervalBuildResult result;
  for (const auto& [id, timestamps] : by_id) {
    if (timestamps.size() < 2) {
      result.skipped.push_back(id);
      continue;
    }
    result.series.emplace(id, build_interval_series(id, timestamps));
  }
  return result;
}

TimeRule derive_time_rule(const LstmNetwork& net, const IntervalSeries& series,
                          bool one_sided) {
  const std::vector<double> normalized = series.normalized();
  const auto window = static_cast<std::size_t>(net.window());
  if (normalized.size() < window + 1) {
    raise(Errc::kInsufficientData, "series shorter than one training window");
  }

  std::vector<double> predictions;
  std::vector<double> residuals;
  predictions.reserve(normalized.size() - window);
  for (std::size_t i = 0; i + window < normalized.size(); ++i) {
    const double pred = net.forward(
        std::span<const double>(normalized.data() + i, window));
    predictions.push_back(pred);
    residuals.push_back(normalized[i + window] - pred);
  }

  const double mean_prediction = mean(predictions);
  const double residual_std_norm = stdev_population(residuals);

  TimeRule rule;
  rule.can_id = series.can_id;
  rule.model_digest = net.digest();
  rule.residual_std = residual_std_norm * series.scale();
  rule.lower_bound = std::max(
      0.0, series.denormalize(mean_prediction - 2.0 * residual_std_norm));
  rule.upper_bound =
      one_sided ? std::numeric_limits<double>::infinity()
                : series.denormalize(mean_prediction + 2.0 * residual_std_norm);
  return rule;
}

const TimeRule* TimeRuleBank::find(std::uint32_t can_id) const {
  auto it = std::lower_bound(rules.begin(), rules.end(), can_id,
                             [](const TimeRule& r, std::uint32_t id) {
                               return r.can_id < id;
                             });
  return it != rules.end() && it->can_id == can_id ? &*it : nullptr;
}

std::string serialize_time_bank(const TimeRuleBank& bank) {
  json doc;
  doc["schema_version"] = bank.schema_version;
  json meta;
  meta["window"] = bank.config.window;
  meta["epochs"] = bank.config.epochs;
  meta["batch"] = bank.config.batch;
  meta["hidden"] = bank.config.hidden;
  meta["layers"] = bank.config.layers;
  meta["learning_rate"] = bank.config.learning_rate;
  meta["seed"] = bank.config.seed;
  meta["one_sided"] = bank.one_sided;
  doc["meta"] = std::move(meta);

  json rules = json::array();
  for (const TimeRule& r : bank.rules) {
    json j;
    j["can_id"] = hex_id(r.can_id);
    j["lower_bound"] = r.lower_bound;
    j["upper_bound"] =
        std::isfinite(r.upper_bound) ? json(r.upper_bound) : json(nullptr);
    j["residual_std"] = r.residual_std;
    j["model_digest"] = r.model_digest;
    rules.push_back(std::move(j));
  }
  doc["rules"] = std::move(rules);
  return doc.dump(2) + "\n";
}

TimeRuleBank load_time_bank(const std::string& bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::exception& e) {
    raise(Errc::kSchemaMismatch, std::string("not a time bank: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version") ||
      doc["schema_version"] != kTimeBankSchemaVersion) {
    raise(Errc::kSchemaMismatch, "unknown time bank schema_version");
  }

  TimeRuleBank bank;
  try {
    const json& meta = doc.at("meta");
    bank.config.window = meta.at("window").get<int>();
    bank.config.epochs = meta.at("epochs").get<int>();
    bank.config.batch = meta.at("batch").get<int>();
    bank.config.hidden = meta.at("hidden").get<int>();
    bank.config.layers = meta.at("layers").get<int>();
    bank.config.learning_rate = meta.at("learning_rate").get<double>();
    bank.config.seed = meta.at("seed").get<std::uint64_t>();
    bank.one_sided = meta.at("one_sided").get<bool>();
    for (const json& j : doc.at("rules")) {
      TimeRule r;
      r.can_id = parse_hex_id(j.at("can_id").get<std::string>());
      r.lower_bound = j.at("lower_bound").get<double>();
      r.upper_bound = j.at("upper_bound").is_null()
                          ? std::numeric_limits<double>::infinity()
                          : j.at("upper_bound").get<double>();
      r.residual_std = j.at("residual_std").get<double>();
      r.model_digest = j.at("model_digest").get<std::string>();
      bank.rules.push_back(std::move(r));
    }
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    raise(Errc::kIntegrityError, std::string("time bank structure: ") + e.what());
  }

  std::sort(bank.rules.begin(), bank.rules.end(),
            [](const TimeRule& a, const TimeRule& b) {
              return a.can_id < b.can_id;
            });
  for (std::size_t i = 1; i < bank.rules.size(); ++i) {
    if (bank.rules[i].can_id == bank.rules[i - 1].can_id) {
      raise(Errc::kIntegrityError, "duplicate time rule for one id");
    }
  }
  for (const TimeRule& r : bank.rules) {
    if (!(r.lower_bound >= 0.0 && r.lower_bound <= r.upper_bound)) {
      raise(Errc::kIntegrityError, "time rule bounds out of order");
    }
  }
  return bank;
}

TimeRuleBank train_time_bank(std::span<const CanFrame> frames,
                             const LstmConfig& config, bool one_sided,
                             TimeTrainReport* report) {
  IntervalBuildResult intervals = build_intervals(frames);
  if (report) report->skipped_too_few = intervals.skipped;

  TimeRuleBank bank;
  bank.config = config;
  bank.one_sided = one_sided;
  for (const auto& [id, series] : intervals.series) {
    const std::vector<double> normalized = series.normalized();
    if (normalized.size() < static_cast<std::size_t>(config.window) + 1) {
      if (report) report->skipped_insufficient.push_back(id);
      continue;
    }
    LstmConfig per_id = config;
    per_id.seed = config.seed ^ (0x51a1ull * (id + 1));
    TrainStats stats;
    const LstmNetwork net = lstm_train_series(normalized, per_id, &stats);
    if (report) report->stats[id] = std::move(stats);
    bank.rules.push_back(derive_time_rule(net, series, one_sided));
  }
  std::sort(bank.rules.begin(), bank.rules.end(),
            [](const TimeRule& a, const TimeRule& b) {
              return a.can_id < b.can_id;
            });
  return bank;
}

std::vector<TimingVerdict> detect_timing(std::span<const CanFrame> frames,
                                         const TimeRuleBank& bank) {
  std::map<std::uint32_t, double> last_seen;
  std::vector<TimingVerdict> verdicts;
  verdicts.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const CanFrame& f = frames[i];
    TimingVerdict v;
    v.frame_index = i;
    v.can_id = f.can_id;
    v.timestamp = f.timestamp;
    v.interval = std::numeric_limits<double>::quiet_NaN();

    auto it = last_seen.find(f.can_id);
    if (it != last_seen.end()) {
      v.interval = f.timestamp - it->second;
      if (const TimeRule* rule = bank.find(f.can_id)) {
        const double below = rule->lower_bound - v.interval;
        const double above = std::isfinite(rule->upper_bound)
                                 ? v.interval - rule->upper_bound
                                 : -std::numeric_limits<double>::infinity();
        const double excess = std::max(below, above);
        if (excess > kBandEpsilon) {
          v.flagged = true;
          const double width = std::isfinite(rule->upper_bound)
                                   ? rule->upper_bound - rule->lower_bound
                                   : 0.0;
          const double denom =
              std::max({width, rule->lower_bound, kBandEpsilon});
          v.score = excess / denom;
        }
      }
    }
    last_seen[f.can_id] = f.timestamp;
    verdicts.push_back(v);
  }
  return verdicts;
}

std::string timing_verdicts_csv(std::span<const TimingVerdict> verdicts) {
  std::string out = "frame_index,can_id,timestamp,interval,flagged,score\n";
  char buf[160];
  for (const TimingVerdict& v : verdicts) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%s,", v.frame_index,
                  hex_id(v.can_id).c_str(),
                  format_seconds(v.timestamp).c_str());
    out += buf;
    if (std::isnan(v.interval)) {
      out += "";
    } else {
      out += format_seconds(v.interval);
    }
    std::snprintf(buf, sizeof(buf), ",%d,%.9g\n", v.flagged ? 1 : 0, v.score);
    out += buf;
  }
  return out;
}

}  // namespace athena
