#pragma once

#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "athena/frame.hpp"

namespace athena {

// candump text format: `(<float>) <channel> <HEXID>#<HEXPAYLOAD>` per line,
// payload 0..16 hex digits, even length. Blank lines are skipped.
std::vector<CanFrame> parse_candump(std::istream& in);
std::vector<CanFrame> parse_candump(const std::string& text);
std::string to_candump(std::span<const CanFrame> frames);

// Labeled CSV: header with columns timestamp,id,dlc,data0..data7,label
// (any order, extra columns ignored); label 0 = benign, 1 = attack.
std::vector<CanFrame> parse_labeled_csv(std::istream& in);
std::vector<CanFrame> parse_labeled_csv(const std::string& text);
std::string to_labeled_csv(std::span<const CanFrame> frames);

// Dispatches on content: lines starting with '(' are candump, otherwise the
// labeled CSV header is expected.
std::vector<CanFrame> load_frames(const std::filesystem::path& path);
std::vector<CanFrame> parse_frames(const std::string& text);

// Decode one mapped signal from a frame. Throws BitRangeExceedsDlc when the
// bit range reads past the frame payload.
double decode_signal(const CanFrame& frame, const SignalSpec& spec);

// One series per (can_id, signal) pair present in both frames and map;
// unmapped IDs use the default per-byte signals truncated to each frame's
// dlc. Output ordered by can_id, then map order.
std::vector<SignalSeries> extract_signals(std::span<const CanFrame> frames,
                                          const SignalMap& map);

// SignalMap JSON: object keyed by hex ID string, value = array of entries
// {name, start_bit, bit_length, byte_order, value_kind}.
SignalMap parse_signal_map_json(const std::string& text);
SignalMap load_signal_map(const std::filesystem::path& path);

}  // namespace athena
