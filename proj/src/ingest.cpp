#include "athena/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "athena/errors.hpp"
#include "athena/util.hpp"

#include <json.hpp>

namespace athena {

namespace {

bool is_hex_digit(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') ||
         (c >= 'A' && c <= 'F');
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return c - 'A' + 10;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void malformed(std::size_t line_no) {
  raise(Errc::kMalformedLine,
        "malformed candump line " + std::to_string(line_no));
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

}  // namespace

std::vector<CanFrame> parse_candump(std::istream& in) {
  std::vector<CanFrame> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty()) continue;

    // (<float>) <channel> <HEXID>#<HEXPAYLOAD>
    if (text.front() != '(') malformed(line_no);
    const std::size_t close = text.find(')');
    if (close == std::string::npos) malformed(line_no);
    const std::string ts_text = text.substr(1, close - 1);
    std::size_t consumed = 0;
    double timestamp = 0.0;
    try {
      timestamp = std::stod(ts_text, &consumed);
    } catch (const std::exception&) {
      malformed(line_no);
    }
    if (consumed != ts_text.size() || timestamp < 0.0 ||
        !std::isfinite(timestamp)) {
      malformed(line_no);
    }

    std::size_t pos = close + 1;
    while (pos < text.size() && text[pos] == ' ') ++pos;
    const std::size_t chan_end = text.find(' ', pos);
    if (pos >= text.size() || chan_end == std::string::npos) malformed(line_no);
    const std::string channel = text.substr(pos, chan_end - pos);

    pos = chan_end;
    while (pos < text.size() && text[pos] == ' ') ++pos;
    const std::size_t hash = text.find('#', pos);
    if (hash == std::string::npos || hash == pos) malformed(line_no);

    const std::string id_text = text.substr(pos, hash - pos);
    for (char c : id_text) {
      if (!is_hex_digit(c)) malformed(line_no);
    }
    if (id_text.size() > 8) {
      raise(Errc::kIdOutOfRange,
            "id out of range at line " + std::to_string(line_no));
    }
    std::uint32_t can_id = 0;
    for (char c : id_text) {
      can_id = (can_id << 4) | static_cast<std::uint32_t>(hex_value(c));
    }
    const bool extended = id_text.size() > 3;
    if ((!extended && can_id > kMaxStandardId) || can_id > kMaxExtendedId) {
      raise(Errc::kIdOutOfRange,
            "id out of range at line " + std::to_string(line_no));
    }

    const std::string payload_text = text.substr(hash + 1);
    if (payload_text.size() % 2 != 0 || payload_text.size() > 16) {
      malformed(line_no);
    }
    for (char c : payload_text) {
      if (!is_hex_digit(c)) malformed(line_no);
    }

    CanFrame frame;
    frame.timestamp = timestamp;
    frame.channel = channel;
    frame.can_id = can_id;
    frame.extended = extended;
    frame.dlc = static_cast<std::uint8_t>(payload_text.size() / 2);
    for (std::uint8_t i = 0; i < frame.dlc; ++i) {
      frame.data[i] = static_cast<std::uint8_t>(
          (hex_value(payload_text[2 * i]) << 4) |
          hex_value(payload_text[2 * i + 1]));
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<CanFrame> parse_candump(const std::string& text) {
  std::istringstream in(text);
  return parse_candump(in);
}

std::string to_candump(std::span<const CanFrame> frames) {
  std::string out;
  out.reserve(frames.size() * 40);
  char buf[96];
  for (const CanFrame& f : frames) {
    if (f.extended) {
      std::snprintf(buf, sizeof(buf), "(%.6f) %s %08X#", f.timestamp,
                    f.channel.c_str(), f.can_id);
    } else {
      std::snprintf(buf, sizeof(buf), "(%.6f) %s %03X#", f.timestamp,
                    f.channel.c_str(), f.can_id);
    }
    out += buf;
    for (std::uint8_t i = 0; i < f.dlc; ++i) {
      std::snprintf(buf, sizeof(buf), "%02X", f.data[i]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<CanFrame> parse_labeled_csv(std::istream& in) {
  std::string header_line;
  if (!std::getline(in, header_line)) {
    raise(Errc::kMissingColumn, "missing column 'timestamp' (empty input)");
  }
  const std::vector<std::string> header = split_csv_row(header_line);

  auto column = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      raise(Errc::kMissingColumn, "missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t ts_col = column("timestamp");
  const std::size_t id_col = column("id");
  const std::size_t dlc_col = column("dlc");
  std::array<std::size_t, 8> data_col{};
  for (int i = 0; i < 8; ++i) {
    data_col[static_cast<std::size_t>(i)] =
        column("data" + std::to_string(i));
  }
  const std::size_t label_col = column("label");

  auto bad = [](std::size_t row, const std::string& col) -> void {
    raise(Errc::kBadValue,
          "bad value in row " + std::to_string(row) + " column '" + col + "'");
  };

  std::vector<CanFrame> frames;
  std::string line;
  std::size_t row_no = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_row(line);
    auto field = [&](std::size_t idx, const char* col) -> const std::string& {
      if (idx >= fields.size()) bad(row_no, col);
      return fields[idx];
    };

    CanFrame frame;
    try {
      std::size_t used = 0;
      frame.timestamp = std::stod(field(ts_col, "timestamp"), &used);
      if (used != fields[ts_col].size() || frame.timestamp < 0.0) {
        bad(row_no, "timestamp");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      bad(row_no, "timestamp");
    }

    {
      const std::string& id_text = field(id_col, "id");
      bool parsed = false;
      if (id_text.rfind("0x", 0) == 0 || id_text.rfind("0X", 0) == 0) {
        try {
          frame.can_id = parse_hex_id(id_text);
          parsed = true;
        } catch (const Error&) {
        }
      } else {
        // decimal first, bare hex as fallback
        try {
          std::size_t used = 0;
          const unsigned long v = std::stoul(id_text, &used, 10);
          if (used == id_text.size()) {
            frame.can_id = static_cast<std::uint32_t>(v);
            parsed = true;
          }
        } catch (const std::exception&) {
        }
        if (!parsed) {
          try {
            frame.can_id = parse_hex_id(id_text);
            parsed = true;
          } catch (const Error&) {
          }
        }
      }
      if (!parsed || frame.can_id > kMaxExtendedId) bad(row_no, "id");
      frame.extended = frame.can_id > kMaxStandardId;
    }

    {
      const std::string& dlc_text = field(dlc_col, "dlc");
      try {
        std::size_t used = 0;
        const int v = std::stoi(dlc_text, &used, 10);
        if (used != dlc_text.size() || v < 0 || v > 8) bad(row_no, "dlc");
        frame.dlc = static_cast<std::uint8_t>(v);
      } catch (const Error&) {
        throw;
      } catch (const std::exception&) {
        bad(row_no, "dlc");
      }
    }

    for (std::uint8_t i = 0; i < frame.dlc; ++i) {
      const std::string col = "data" + std::to_string(i);
      const std::string& text = field(data_col[i], col.c_str());
      try {
        std::size_t used = 0;
        const long v = std::stol(text, &used, 0);
        if (used != text.size() || v < 0 || v > 255) bad(row_no, col);
        frame.data[i] = static_cast<std::uint8_t>(v);
      } catch (const Error&) {
        throw;
      } catch (const std::exception&) {
        bad(row_no, col);
      }
    }

    {
      const std::string& text = field(label_col, "label");
      if (text == "0") frame.label = FrameLabel::kBenign;
      else if (text == "1") frame.label = FrameLabel::kAttack;
      else bad(row_no, "label");
    }

    frame.channel = "can0";
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<CanFrame> parse_labeled_csv(const std::string& text) {
  std::istringstream in(text);
  return parse_labeled_csv(in);
}

std::string to_labeled_csv(std::span<const CanFrame> frames) {
  std::string out =
      "timestamp,id,dlc,data0,data1,data2,data3,data4,data5,data6,data7,"
      "label\n";
  char buf[64];
  for (const CanFrame& f : frames) {
    std::snprintf(buf, sizeof(buf), "%.6f,", f.timestamp);
    out += buf;
    out += hex_id(f.can_id);
    std::snprintf(buf, sizeof(buf), ",%d", static_cast<int>(f.dlc));
    out += buf;
    for (int i = 0; i < 8; ++i) {
      const int v = i < f.dlc ? f.data[static_cast<std::size_t>(i)] : 0;
      std::snprintf(buf, sizeof(buf), ",%d", v);
      out += buf;
    }
    out += f.label == FrameLabel::kAttack ? ",1\n" : ",0\n";
  }
  return out;
}

std::vector<CanFrame> parse_frames(const std::string& text) {
  for (char c : text) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t') continue;
    if (c == '(') return parse_candump(text);
    break;
  }
  return parse_labeled_csv(text);
}

std::vector<CanFrame> load_frames(const std::filesystem::path& path) {
  return parse_frames(read_file(path));
}

const std::vector<SignalSpec>& SignalMap::default_byte_signals() {
  static const std::vector<SignalSpec> kDefault = [] {
    std::vector<SignalSpec> specs;
    for (int i = 0; i < 8; ++i) {
      SignalSpec s;
      s.name = "byte" + std::to_string(i);
      s.start_bit = static_cast<std::uint8_t>(8 * i);
      s.bit_length = 8;
      s.byte_order = ByteOrder::kLittle;
      s.value_kind = ValueKind::kUnsigned;
      specs.push_back(std::move(s));
    }
    return specs;
  }();
  return kDefault;
}

double decode_signal(const CanFrame& frame, const SignalSpec& spec) {
  const int start = spec.start_bit;
  const int length = spec.bit_length;
  if (start + length > frame.dlc * 8) {
    raise(Errc::kBitRangeExceedsDlc,
          "signal '" + spec.name + "' reads past dlc on id " +
              hex_id(frame.can_id));
  }
  std::uint64_t raw = 0;
  if (spec.byte_order == ByteOrder::kBig) {
    // Bit b counts from the MSB of byte 0; first bit read is the value MSB.
    for (int i = 0; i < length; ++i) {
      const int b = start + i;
      const std::uint8_t byte = frame.data[static_cast<std::size_t>(b / 8)];
      const std::uint8_t bit = (byte >> (7 - (b % 8))) & 1u;
      raw = (raw << 1) | bit;
    }
  } else {
    // Bit b counts from the LSB of byte 0; bit i lands at value position i.
    for (int i = 0; i < length; ++i) {
      const int b = start + i;
      const std::uint8_t byte = frame.data[static_cast<std::size_t>(b / 8)];
      const std::uint8_t bit = (byte >> (b % 8)) & 1u;
      raw |= static_cast<std::uint64_t>(bit) << i;
    }
  }
  if (spec.value_kind == ValueKind::kSigned && length < 64 &&
      (raw & (1ull << (length - 1)))) {
    raw |= ~((1ull << length) - 1);  // sign-extend
  }
  if (spec.value_kind == ValueKind::kSigned) {
    return static_cast<double>(static_cast<std::int64_t>(raw));
  }
  return static_cast<double>(raw);
}

std::vector<SignalSeries> extract_signals(std::span<const CanFrame> frames,
                                          const SignalMap& map) {
  if (frames.empty()) raise(Errc::kEmptyInput, "extract_signals: no frames");

  // (can_id, spec index) -> series slot, built in a deterministic order.
  std::map<std::uint32_t, std::vector<SignalSeries>> by_id;
  for (const CanFrame& frame : frames) {
    const std::vector<SignalSpec>* specs = map.find(frame.can_id);
    const bool mapped = specs != nullptr;
    if (!mapped) specs = &SignalMap::default_byte_signals();

    auto& slots = by_id[frame.can_id];
    if (slots.empty()) {
      slots.resize(specs->size());
      for (std::size_t i = 0; i < specs->size(); ++i) {
        slots[i].can_id = frame.can_id;
        slots[i].signal_name = (*specs)[i].name;
      }
    }
    for (std::size_t i = 0; i < specs->size(); ++i) {
      const SignalSpec& spec = (*specs)[i];
      if (!mapped && spec.start_bit + spec.bit_length > frame.dlc * 8) {
        continue;  // default map truncates to the frame's dlc
      }
      const double value = decode_signal(frame, spec);
      slots[i].timestamps.push_back(frame.timestamp);
      slots[i].values.push_back(value);
    }
  }

  std::vector<SignalSeries> out;
  for (auto& [id, slots] : by_id) {
    for (auto& series : slots) {
      if (!series.timestamps.empty()) out.push_back(std::move(series));
    }
  }
  return out;
}

SignalMap parse_signal_map_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::kInvalidSpec, std::string("signal map: ") + e.what());
  }
  if (!doc.is_object()) raise(Errc::kInvalidSpec, "signal map: not an object");

  SignalMap map;
  for (const auto& [key, value] : doc.items()) {
    const std::uint32_t can_id = parse_hex_id(key);
    if (!value.is_array()) {
      raise(Errc::kInvalidSpec,
            "signal map: entry for " + key + " is not an array");
    }
    std::vector<SignalSpec> specs;
    for (const auto& entry : value) {
      SignalSpec spec;
      spec.name = entry.at("name").get<std::string>();
      spec.start_bit = entry.at("start_bit").get<std::uint8_t>();
      spec.bit_length = entry.at("bit_length").get<std::uint8_t>();
      const std::string order = entry.at("byte_order").get<std::string>();
      if (order == "big") spec.byte_order = ByteOrder::kBig;
      else if (order == "little") spec.byte_order = ByteOrder::kLittle;
      else raise(Errc::kInvalidSpec, "signal map: byte_order '" + order + "'");
      const std::string kind = entry.at("value_kind").get<std::string>();
      if (kind == "unsigned") spec.value_kind = ValueKind::kUnsigned;
      else if (kind == "signed") spec.value_kind = ValueKind::kSigned;
      else raise(Errc::kInvalidSpec, "signal map: value_kind '" + kind + "'");
      if (spec.bit_length < 1 || spec.bit_length > 64 || spec.start_bit > 63 ||
          spec.start_bit + spec.bit_length > 64) {
        raise(Errc::kInvalidSpec,
              "signal map: bit range of '" + spec.name + "' exceeds 64 bits");
      }
      specs.push_back(std::move(spec));
    }
    map.entries[can_id] = std::move(specs);
  }
  return map;
}

SignalMap load_signal_map(const std::filesystem::path& path) {
  return parse_signal_map_json(read_file(path));
}

}  // namespace athena
