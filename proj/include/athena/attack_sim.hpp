#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "athena/frame.hpp"

namespace athena {

// Payload generator for one byte-wide signal. A random walk moves by
// +/- step (sign drawn per frame) plus gaussian noise, reflecting at the
// [min, max] byte bounds; its deltas are bimodal, giving the mixture models
// distinct up/down states to latch onto. A correlated signal is a linear
// function of another signal's emitted value at the same frame index, which
// plants an exact cross-ID invariant.
struct SignalGenSpec {
  enum class Kind { kConstant, kRandomWalk, kCorrelated };
  std::string name;
  Kind kind = Kind::kConstant;
  double value = 0.0;     // constant
  double init = 128.0;    // random walk start
  double step = 16.0;     // random walk step magnitude
  double step_std = 0.0;  // gaussian noise on each step
  double min = 0.0;
  double max = 255.0;
  std::string source;     // correlated: "<hexid>.<signal>"
  double coeff = 1.0;     // correlated: value = coeff * source + offset
  double offset = 0.0;
};

struct IdTrafficSpec {
  double period = 0.1;      // seconds
  double jitter_std = 0.0;  // gaussian timestamp jitter, clipped
  std::vector<SignalGenSpec> signals;  // one per payload byte, dlc = size
};

struct TrafficSpec {
  double duration = 60.0;
  std::uint64_t seed = 0;
  std::map<std::uint32_t, IdTrafficSpec> ids;
};

enum class AttackKind { kDos, kFuzzing, kTargetedId, kSuspension, kMasquerade };

struct AttackSpec {
  AttackKind kind = AttackKind::kMasquerade;
  std::uint32_t target_id = 0;
  double start = 0.0;
  double end = 0.0;
  double gap = 0.001;        // injection spacing for dos/fuzzing/targeted
  int override_byte = 0;     // masquerade/targeted byte override
  std::uint8_t override_value = 0xFF;
  std::optional<std::vector<std::uint8_t>> override_payload;
};

// Benign frames at t = n*period + jitter per ID, merged by timestamp,
// labeled benign. Deterministic for a fixed seed.
std::vector<CanFrame> generate_benign(const TrafficSpec& spec);

// Injects or mutates frames per the attack kind; all injected or modified
// frames carry the attack label. Masquerade keeps the victim's timestamps
// and replaces payload only, so per-ID timing is unchanged by construction.
std::vector<CanFrame> inject(std::span<const CanFrame> frames,
                             const AttackSpec& attack, std::uint64_t seed);

TrafficSpec parse_traffic_spec_json(const std::string& text);
std::string traffic_spec_json(const TrafficSpec& spec);
AttackSpec parse_attack_spec_json(const std::string& text);
std::string attack_spec_json(const AttackSpec& spec);

}  // namespace athena
