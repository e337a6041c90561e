#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace athena {

constexpr std::uint32_t kMaxStandardId = 0x7FF;
constexpr std::uint32_t kMaxExtendedId = 0x1FFFFFFF;

enum class FrameLabel : std::uint8_t { kUnlabeled = 0, kBenign, kAttack };

// One timestamped CAN message. Timestamps are capture-relative seconds with
// microsecond resolution; only inter-arrival deltas matter downstream.
struct CanFrame {
  double timestamp = 0.0;
  std::string channel;
  std::uint32_t can_id = 0;
  bool extended = false;  // 29-bit id when true
  std::uint8_t dlc = 0;
  std::array<std::uint8_t, 8> data{};
  FrameLabel label = FrameLabel::kUnlabeled;

  std::span<const std::uint8_t> payload() const {
    return {data.data(), static_cast<std::size_t>(dlc)};
  }

  bool operator==(const CanFrame&) const = default;
};

enum class ByteOrder : std::uint8_t { kBig, kLittle };
enum class ValueKind : std::uint8_t { kUnsigned, kSigned };

struct SignalSpec {
  std::string name;
  std::uint8_t start_bit = 0;   // 0..63
  std::uint8_t bit_length = 8;  // 1..64
  ByteOrder byte_order = ByteOrder::kLittle;
  ValueKind value_kind = ValueKind::kUnsigned;
};

// Per-ID signal layout. IDs absent from the map fall back to one unsigned
// signal per payload byte (byte0..byte7), truncated to each frame's dlc.
struct SignalMap {
  std::map<std::uint32_t, std::vector<SignalSpec>> entries;

  const std::vector<SignalSpec>* find(std::uint32_t can_id) const {
    auto it = entries.find(can_id);
    return it == entries.end() ? nullptr : &it->second;
  }

  static const std::vector<SignalSpec>& default_byte_signals();
};

// Decoded numeric time series for one (can_id, signal) pair. Point order
// equals frame order restricted to that ID.
struct SignalSeries {
  std::uint32_t can_id = 0;
  std::string signal_name;
  std::vector<double> timestamps;
  std::vector<double> values;
};

}  // namespace athena
