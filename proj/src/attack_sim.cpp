#include "athena/attack_sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "athena/errors.hpp"
#include "athena/util.hpp"

namespace athena {

namespace {

using nlohmann::json;

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(
      std::clamp<long>(std::lround(v), 0, 255));
}

double reflect(double v, double lo, double hi) {
  for (int guard = 0; guard < 64 && (v < lo || v > hi); ++guard) {
    if (v > hi) v = hi - (v - hi);
    if (v < lo) v = lo + (lo - v);
  }
  return std::clamp(v, lo, hi);
}

struct SignalKey {
  std::uint32_t can_id;
  std::size_t signal_index;
  auto operator<=>(const SignalKey&) const = default;
};

// Resolves "0x123.byte0" against the spec.
SignalKey resolve_source(const TrafficSpec& spec, const std::string& ref) {
  const std::size_t dot = ref.find('.');
  if (dot == std::string::npos) {
    raise(Errc::kInvalidSpec, "correlated source must be '<id>.<signal>'");
  }
  const std::uint32_t id = parse_hex_id(ref.substr(0, dot));
  const std::string name = ref.substr(dot + 1);
  auto it = spec.ids.find(id);
  if (it == spec.ids.end()) {
    raise(Errc::kInvalidSpec, "correlated source id unknown: " + ref);
  }
  for (std::size_t i = 0; i < it->second.signals.size(); ++i) {
    if (it->second.signals[i].name == name) return {id, i};
  }
  raise(Errc::kInvalidSpec, "correlated source signal unknown: " + ref);
}

void validate_spec(const TrafficSpec& spec) {
  if (spec.duration <= 0.0) raise(Errc::kInvalidSpec, "duration must be > 0");
  if (spec.ids.empty()) raise(Errc::kInvalidSpec, "no ids in traffic spec");
  for (const auto& [id, traffic] : spec.ids) {
    if (traffic.period <= 0.0) {
      raise(Errc::kInvalidSpec, "period must be > 0 for " + hex_id(id));
    }
    if (traffic.jitter_std < 0.0) {
      raise(Errc::kInvalidSpec, "jitter_std must be >= 0 for " + hex_id(id));
    }
    if (traffic.signals.size() > 8) {
      raise(Errc::kInvalidSpec, "more than 8 signals for " + hex_id(id));
    }
    std::set<std::string> names;
    for (const SignalGenSpec& s : traffic.signals) {
      if (!names.insert(s.name).second) {
        raise(Errc::kInvalidSpec, "duplicate signal name for " + hex_id(id));
      }
      if (s.kind == SignalGenSpec::Kind::kRandomWalk &&
          (s.step < 0.0 || s.step_std < 0.0 || s.min > s.max)) {
        raise(Errc::kInvalidSpec, "bad random walk parameters for " + s.name);
      }
    }
  }

  // Correlation references: valid targets, equal periods, no cycles.
  std::map<SignalKey, SignalKey> edges;
  for (const auto& [id, traffic] : spec.ids) {
    for (std::size_t i = 0; i < traffic.signals.size(); ++i) {
      const SignalGenSpec& s = traffic.signals[i];
      if (s.kind != SignalGenSpec::Kind::kCorrelated) continue;
      const SignalKey src = resolve_source(spec, s.source);
      if (spec.ids.at(src.can_id).period != traffic.period) {
        raise(Errc::kInvalidSpec,
              "correlated signals must share a period: " + s.source);
      }
      edges[{id, i}] = src;
    }
  }
  for (const auto& [from, unused] : edges) {
    (void)unused;
    SignalKey cursor = from;
    for (int hops = 0; hops <= static_cast<int>(edges.size()); ++hops) {
      auto it = edges.find(cursor);
      if (it == edges.end()) break;
      cursor = it->second;
      if (cursor == from) {
        raise(Errc::kInvalidSpec, "correlation cycle detected");
      }
    }
  }
}

}  // namespace

std::vector<CanFrame> generate_benign(const TrafficSpec& spec) {
  validate_spec(spec);

  struct IdState {
    const IdTrafficSpec* traffic;
    Rng rng;
    std::size_t frame_count;
    std::vector<double> walk_state;
  };
  std::map<std::uint32_t, IdState> states;
  std::size_t max_frames = 0;
  for (const auto& [id, traffic] : spec.ids) {
    IdState state{&traffic, Rng(spec.seed ^ (0x9E3779B97F4A7C15ull * (id + 1))),
                  static_cast<std::size_t>(
                      std::ceil(spec.duration / traffic.period)),
                  {}};
    state.walk_state.reserve(traffic.signals.size());
    for (const SignalGenSpec& s : traffic.signals) {
      state.walk_state.push_back(s.init);
    }
    max_frames = std::max(max_frames, state.frame_count);
    states.emplace(id, std::move(state));
  }

  // Evaluation order per frame index: sources before dependents.
  std::vector<SignalKey> nodes;
  std::map<SignalKey, SignalKey> edges;
  for (const auto& [id, traffic] : spec.ids) {
    for (std::size_t i = 0; i < traffic.signals.size(); ++i) {
      nodes.push_back({id, i});
      const SignalGenSpec& s = traffic.signals[i];
      if (s.kind == SignalGenSpec::Kind::kCorrelated) {
        edges[{id, i}] = resolve_source(spec, s.source);
      }
    }
  }
  std::vector<SignalKey> topo;
  std::set<SignalKey> placed;
  while (topo.size() < nodes.size()) {
    for (const SignalKey& node : nodes) {
      if (placed.count(node)) continue;
      auto it = edges.find(node);
      if (it == edges.end() || placed.count(it->second)) {
        topo.push_back(node);
        placed.insert(node);
      }
    }
  }

  std::vector<CanFrame> frames;
  std::map<SignalKey, std::uint8_t> emitted;
  for (std::size_t n = 0; n < max_frames; ++n) {
    // Jitter first so each id's value stream is independent of it.
    std::map<std::uint32_t, double> timestamps;
    for (auto& [id, state] : states) {
      if (n >= state.frame_count) continue;
      const IdTrafficSpec& traffic = *state.traffic;
      double jitter = 0.0;
      if (traffic.jitter_std > 0.0) {
        const double clip = 0.49 * traffic.period;
        jitter = std::clamp(state.rng.gaussian(0.0, traffic.jitter_std),
                            -clip, clip);
      }
      timestamps[id] =
          std::max(0.0, static_cast<double>(n) * traffic.period + jitter);
    }

    for (const SignalKey& key : topo) {
      auto& state = states.at(key.can_id);
      if (n >= state.frame_count) continue;
      const SignalGenSpec& s = state.traffic->signals[key.signal_index];
      double value = 0.0;
      switch (s.kind) {
        case SignalGenSpec::Kind::kConstant:
          value = s.value;
          break;
        case SignalGenSpec::Kind::kRandomWalk: {
          if (n > 0) {
            const double sign = state.rng.coin() ? 1.0 : -1.0;
            const double noise =
                s.step_std > 0.0 ? state.rng.gaussian(0.0, s.step_std) : 0.0;
            state.walk_state[key.signal_index] =
                reflect(state.walk_state[key.signal_index] + sign * s.step +
                            noise,
                        s.min, s.max);
          }
          value = state.walk_state[key.signal_index];
          break;
        }
        case SignalGenSpec::Kind::kCorrelated: {
          const SignalKey src = resolve_source(spec, s.source);
          value = s.coeff * static_cast<double>(emitted.at(src)) + s.offset;
          break;
        }
      }
      emitted[key] = to_byte(value);
    }

    for (auto& [id, state] : states) {
      if (n >= state.frame_count) continue;
      CanFrame frame;
      frame.timestamp = timestamps.at(id);
      frame.channel = "can0";
      frame.can_id = id;
      frame.extended = id > kMaxStandardId;
      frame.dlc = static_cast<std::uint8_t>(state.traffic->signals.size());
      for (std::size_t i = 0; i < state.traffic->signals.size(); ++i) {
        frame.data[i] = emitted.at({id, i});
      }
      frame.label = FrameLabel::kBenign;
      frames.push_back(std::move(frame));
    }
  }

  std::stable_sort(frames.begin(), frames.end(),
                   [](const CanFrame& a, const CanFrame& b) {
                     return a.timestamp < b.timestamp;
                   });
  return frames;
}

std::vector<CanFrame> inject(std::span<const CanFrame> frames,
                             const AttackSpec& attack, std::uint64_t seed) {
  if (frames.empty()) raise(Errc::kEmptyInput, "no frames to attack");
  if (!(attack.start < attack.end)) {
    raise(Errc::kWindowOutOfRange, "attack start must precede end");
  }
  const double first = frames.front().timestamp;
  const double last = frames.back().timestamp;
  if (attack.start < first || attack.end > last) {
    raise(Errc::kWindowOutOfRange, "attack window outside the traffic span");
  }

  const bool needs_target = attack.kind == AttackKind::kTargetedId ||
                            attack.kind == AttackKind::kSuspension ||
                            attack.kind == AttackKind::kMasquerade;
  std::set<std::uint32_t> present_ids;
  for (const CanFrame& f : frames) present_ids.insert(f.can_id);
  if (needs_target && !present_ids.count(attack.target_id)) {
    raise(Errc::kUnknownTarget,
          "target id " + hex_id(attack.target_id) + " not in traffic");
  }

  const auto in_window = [&](double t) {
    return t >= attack.start && t < attack.end;
  };

  Rng rng(seed);
  std::vector<CanFrame> out;
  out.reserve(frames.size());

  auto apply_override = [&](CanFrame& frame) {
    if (attack.override_payload) {
      const auto& payload = *attack.override_payload;
      frame.dlc = static_cast<std::uint8_t>(std::min<std::size_t>(8, payload.size()));
      frame.data.fill(0);
      std::copy_n(payload.begin(), frame.dlc, frame.data.begin());
    } else if (attack.override_byte >= 0 && attack.override_byte < 8) {
      if (frame.dlc <= attack.override_byte) {
        frame.dlc = static_cast<std::uint8_t>(attack.override_byte + 1);
      }
      frame.data[static_cast<std::size_t>(attack.override_byte)] =
          attack.override_value;
    }
  };

  switch (attack.kind) {
    case AttackKind::kSuspension:
      for (const CanFrame& f : frames) {
        if (f.can_id == attack.target_id && in_window(f.timestamp)) continue;
        out.push_back(f);
      }
      return out;

    case AttackKind::kMasquerade:
      for (const CanFrame& f : frames) {
        CanFrame copy = f;
        if (f.can_id == attack.target_id && in_window(f.timestamp)) {
          apply_override(copy);
          copy.label = FrameLabel::kAttack;
        }
        out.push_back(std::move(copy));
      }
      return out;

    case AttackKind::kDos:
    case AttackKind::kFuzzing:
    case AttackKind::kTargetedId: {
      if (attack.gap <= 0.0) raise(Errc::kInvalidSpec, "gap must be > 0");
      out.assign(frames.begin(), frames.end());

      // Template payload for targeted injection: last benign payload of the
      // target before the window.
      CanFrame proto;
      proto.channel = "can0";
      proto.dlc = 8;
      if (attack.kind == AttackKind::kTargetedId) {
        for (const CanFrame& f : frames) {
          if (f.can_id == attack.target_id && f.timestamp < attack.start) {
            proto = f;
          }
        }
      }

      std::vector<std::uint32_t> id_pool(present_ids.begin(),
                                         present_ids.end());
      std::vector<CanFrame> injected;
      for (std::size_t k = 0;; ++k) {
        const double t = attack.start + static_cast<double>(k) * attack.gap;
        if (t >= attack.end) break;
        CanFrame frame;
        frame.timestamp = t;
        frame.channel = "can0";
        frame.label = FrameLabel::kAttack;
        switch (attack.kind) {
          case AttackKind::kDos:
            frame.can_id = 0x000;
            frame.dlc = 8;
            break;
          case AttackKind::kFuzzing:
            // Half from the live id set, half arbitrary 11-bit ids, so both
            // unknown-id policy branches see traffic.
            frame.can_id = rng.coin()
                               ? id_pool[rng.below(id_pool.size())]
                               : static_cast<std::uint32_t>(rng.below(0x800));
            frame.dlc = 8;
            for (auto& b : frame.data) {
              b = static_cast<std::uint8_t>(rng.below(256));
            }
            break;
          case AttackKind::kTargetedId:
            frame = proto;
            frame.timestamp = t;
            frame.can_id = attack.target_id;
            frame.label = FrameLabel::kAttack;
            apply_override(frame);
            break;
          default:
            break;
        }
        injected.push_back(std::move(frame));
      }
      out.insert(out.end(), injected.begin(), injected.end());
      std::stable_sort(out.begin(), out.end(),
                       [](const CanFrame& a, const CanFrame& b) {
                         return a.timestamp < b.timestamp;
                       });
      return out;
    }
  }
  raise(Errc::kInvalidSpec, "unhandled attack kind");
}

TrafficSpec parse_traffic_spec_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(Errc::kInvalidSpec, std::string("traffic spec: ") + e.what());
  }
  TrafficSpec spec;
  try {
    spec.duration = doc.at("duration").get<double>();
    spec.seed = doc.value("seed", 0ull);
    for (const auto& [key, value] : doc.at("ids").items()) {
      IdTrafficSpec traffic;
      traffic.period = value.at("period").get<double>();
      traffic.jitter_std = value.value("jitter_std", 0.0);
      for (const json& s : value.at("signals")) {
        SignalGenSpec gen;
        gen.name = s.at("name").get<std::string>();
        const std::string kind = s.at("kind").get<std::string>();
        if (kind == "constant") {
          gen.kind = SignalGenSpec::Kind::kConstant;
          gen.value = s.at("value").get<double>();
        } else if (kind == "random_walk") {
          gen.kind = SignalGenSpec::Kind::kRandomWalk;
          gen.init = s.value("init", 128.0);
          gen.step = s.value("step", 16.0);
          gen.step_std = s.value("step_std", 0.0);
          gen.min = s.value("min", 0.0);
          gen.max = s.value("max", 255.0);
        } else if (kind == "correlated") {
          gen.kind = SignalGenSpec::Kind::kCorrelated;
          gen.source = s.at("source").get<std::string>();
          gen.coeff = s.value("coeff", 1.0);
          gen.offset = s.value("offset", 0.0);
        } else {
          raise(Errc::kInvalidSpec, "unknown signal kind '" + kind + "'");
        }
        traffic.signals.push_back(std::move(gen));
      }
      spec.ids.emplace(parse_hex_id(key), std::move(traffic));
    }
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    raise(Errc::kInvalidSpec, std::string("traffic spec: ") + e.what());
  }
  validate_spec(spec);
  return spec;
}

std::string traffic_spec_json(const TrafficSpec& spec) {
  json doc;
  doc["duration"] = spec.duration;
  doc["seed"] = spec.seed;
  json ids;
  for (const auto& [id, traffic] : spec.ids) {
    json t;
    t["period"] = traffic.period;
    t["jitter_std"] = traffic.jitter_std;
    json signals = json::array();
    for (const SignalGenSpec& s : traffic.signals) {
      json g;
      g["name"] = s.name;
      switch (s.kind) {
        case SignalGenSpec::Kind::kConstant:
          g["kind"] = "constant";
          g["value"] = s.value;
          break;
        case SignalGenSpec::Kind::kRandomWalk:
          g["kind"] = "random_walk";
          g["init"] = s.init;
          g["step"] = s.step;
          g["step_std"] = s.step_std;
          g["min"] = s.min;
          g["max"] = s.max;
          break;
        case SignalGenSpec::Kind::kCorrelated:
          g["kind"] = "correlated";
          g["source"] = s.source;
          g["coeff"] = s.coeff;
          g["offset"] = s.offset;
          break;
      }
      signals.push_back(std::move(g));
    }
    t["signals"] = std::move(signals);
    ids[hex_id(id)] = std::move(t);
  }
  doc["ids"] = std::move(ids);
  return doc.dump(2) + "\n";
}

AttackSpec parse_attack_spec_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(Errc::kInvalidSpec, std::string("attack spec: ") + e.what());
  }
  AttackSpec attack;
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "dos") attack.kind = AttackKind::kDos;
    else if (kind == "fuzzing") attack.kind = AttackKind::kFuzzing;
    else if (kind == "targeted_id") attack.kind = AttackKind::kTargetedId;
    else if (kind == "suspension") attack.kind = AttackKind::kSuspension;
    else if (kind == "masquerade") attack.kind = AttackKind::kMasquerade;
    else raise(Errc::kInvalidSpec, "unknown attack kind '" + kind + "'");
    if (doc.contains("target_id")) {
      attack.target_id = parse_hex_id(doc["target_id"].get<std::string>());
    }
    attack.start = doc.at("start").get<double>();
    attack.end = doc.at("end").get<double>();
    attack.gap = doc.value("gap", 0.001);
    attack.override_byte = doc.value("override_byte", 0);
    attack.override_value =
        static_cast<std::uint8_t>(doc.value("override_value", 255));
    if (doc.contains("override_payload") &&
        !doc["override_payload"].is_null()) {
      attack.override_payload =
          doc["override_payload"].get<std::vector<std::uint8_t>>();
    }
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    raise(Errc::kInvalidSpec, std::string("attack spec: ") + e.what());
  }
  return attack;
}

std::string attack_spec_json(const AttackSpec& attack) {
  json doc;
  switch (attack.kind) {
    case AttackKind::kDos: doc["kind"] = "dos"; break;
    case AttackKind::kFuzzing: doc["kind"] = "fuzzing"; break;
    case AttackKind::kTargetedId: doc["kind"] = "targeted_id"; break;
    case AttackKind::kSuspension: doc["kind"] = "suspension"; break;
    case AttackKind::kMasquerade: doc["kind"] = "masquerade"; break;
  }
  doc["target_id"] = hex_id(attack.target_id);
  doc["start"] = attack.start;
  doc["end"] = attack.end;
  doc["gap"] = attack.gap;
  doc["override_byte"] = attack.override_byte;
  doc["override_value"] = attack.override_value;
  if (attack.override_payload) {
    doc["override_payload"] = *attack.override_payload;
  }
  return doc.dump(2) + "\n";
}

}  // namespace athena
