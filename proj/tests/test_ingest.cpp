#include <doctest.h>

#include "athena/errors.hpp"
#include "athena/ingest.hpp"
#include "athena/util.hpp"

using namespace athena;

TEST_SUITE("can_ingest") {

TEST_CASE("candump line maps to frame fields") {
  const auto frames =
      parse_candump(std::string("(1553455234.123456) can0 4E7#1122\n"));
  REQUIRE(frames.size() == 1);
  const CanFrame& f = frames[0];
  CHECK(f.timestamp == doctest::Approx(1553455234.123456));
  CHECK(f.channel == "can0");
  CHECK(f.can_id == 0x4E7);
  CHECK_FALSE(f.extended);
  CHECK(f.dlc == 2);
  CHECK(f.data[0] == 0x11);
  CHECK(f.data[1] == 0x22);
  CHECK(f.label == FrameLabel::kUnlabeled);
}

TEST_CASE("empty payload is a valid frame") {
  const auto frames = parse_candump(std::string("(0.0) can0 000#\n"));
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].timestamp == 0.0);
  CHECK(frames[0].can_id == 0x000);
  CHECK(frames[0].dlc == 0);
}

TEST_CASE("grammar violations carry the line number") {
  try {
    parse_candump(std::string("(1.0) can0 ZZZ#00\n"));
    FAIL("expected MalformedLine");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kMalformedLine);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }

  // odd payload digit count
  CHECK_THROWS_AS(parse_candump(std::string("(1.0) can0 4E7#123\n")), Error);
  // missing hash
  CHECK_THROWS_AS(parse_candump(std::string("(1.0) can0 4E7\n")), Error);
}

TEST_CASE("id range checks") {
  try {
    parse_candump(std::string("(1.0) can0 FFF#00\n"));
    FAIL("expected IdOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kIdOutOfRange);
  }
  // 8 hex digits parse as extended
  const auto frames = parse_candump(std::string("(1.0) can0 1FFFFFFF#00\n"));
  CHECK(frames[0].extended);
  CHECK(frames[0].can_id == 0x1FFFFFFFu);
  CHECK_THROWS_AS(parse_candump(std::string("(1.0) can0 123456789#00\n")),
                  Error);
}

TEST_CASE("candump round trip is identity") {
  // Random microsecond-grid corpus, built as text first: the property is
  // parse -> serialize -> parse over parsed frames.
  Rng rng(7);
  std::string corpus;
  std::uint64_t micros = 0;
  char line[64];
  for (int i = 0; i < 200; ++i) {
    micros += 1 + rng.below(20000);
    const auto id = static_cast<std::uint32_t>(rng.below(0x800));
    std::snprintf(line, sizeof(line), "(%llu.%06llu) can0 %03X#",
                  static_cast<unsigned long long>(micros / 1000000),
                  static_cast<unsigned long long>(micros % 1000000), id);
    corpus += line;
    const int dlc = static_cast<int>(rng.below(9));
    for (int b = 0; b < dlc; ++b) {
      std::snprintf(line, sizeof(line), "%02X",
                    static_cast<unsigned>(rng.below(256)));
      corpus += line;
    }
    corpus += '\n';
  }
  const auto frames = parse_candump(corpus);
  REQUIRE(frames.size() == 200);
  const std::string text = to_candump(frames);
  const auto reparsed = parse_candump(text);
  CHECK(reparsed == frames);
  CHECK(to_candump(reparsed) == text);
}

TEST_CASE("labeled csv rows") {
  const std::string csv =
      "timestamp,id,dlc,data0,data1,data2,data3,data4,data5,data6,data7,"
      "label\n"
      "0.10,0x4E7,8,0,0,0,0,0,0,0,0,0\n"
      "0.20,0x4E7,8,255,0,0,0,0,0,0,0,1\n";
  const auto frames = parse_labeled_csv(csv);
  REQUIRE(frames.size() == 2);
  CHECK(frames[0].label == FrameLabel::kBenign);
  CHECK(frames[1].label == FrameLabel::kAttack);
  CHECK(frames[1].data[0] == 0xFF);
  CHECK(frames[1].can_id == 0x4E7);
}

TEST_CASE("missing column is reported by name") {
  const std::string csv =
      "timestamp,id,dlc,data0,data1,data2,data3,data4,data5,data6,data7\n"
      "0.1,0x1,0,0,0,0,0,0,0,0,0\n";
  try {
    parse_labeled_csv(csv);
    FAIL("expected MissingColumn");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kMissingColumn);
    CHECK(std::string(e.what()).find("label") != std::string::npos);
  }
}

TEST_CASE("bad csv values carry row and column") {
  const std::string csv =
      "timestamp,id,dlc,data0,data1,data2,data3,data4,data5,data6,data7,"
      "label\n"
      "0.1,0x4E7,9,0,0,0,0,0,0,0,0,0\n";
  try {
    parse_labeled_csv(csv);
    FAIL("expected BadValue");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kBadValue);
    CHECK(std::string(e.what()).find("dlc") != std::string::npos);
  }
}

TEST_CASE("default map decodes each payload byte") {
  const auto frames = parse_candump(std::string("(0.0) can0 4E7#1122\n"));
  const auto series = extract_signals(frames, SignalMap{});
  REQUIRE(series.size() == 2);
  CHECK(series[0].signal_name == "byte0");
  CHECK(series[0].values == std::vector<double>{17.0});
  CHECK(series[1].signal_name == "byte1");
  CHECK(series[1].values == std::vector<double>{34.0});
}

TEST_CASE("big endian multi-byte decode") {
  CanFrame f;
  f.can_id = 0x10;
  f.dlc = 2;
  f.data[0] = 0x01;
  f.data[1] = 0x00;
  SignalSpec spec{"speed", 0, 16, ByteOrder::kBig, ValueKind::kUnsigned};
  CHECK(decode_signal(f, spec) == 256.0);
}

TEST_CASE("signed little endian decode sign-extends") {
  CanFrame f;
  f.can_id = 0x10;
  f.dlc = 1;
  f.data[0] = 0xFF;
  SignalSpec spec{"temp", 0, 8, ByteOrder::kLittle, ValueKind::kSigned};
  CHECK(decode_signal(f, spec) == -1.0);
}

TEST_CASE("mapped signal past dlc is an error") {
  CanFrame f;
  f.can_id = 0x10;
  f.dlc = 2;
  SignalSpec spec{"tail", 56, 8, ByteOrder::kLittle, ValueKind::kUnsigned};
  try {
    decode_signal(f, spec);
    FAIL("expected BitRangeExceedsDlc");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kBitRangeExceedsDlc);
  }

  SignalMap map;
  map.entries[0x10] = {spec};
  std::vector<CanFrame> frames{f};
  CHECK_THROWS_AS(extract_signals(frames, map), Error);
}

TEST_CASE("extraction is total over the default map") {
  Rng rng(3);
  std::vector<CanFrame> frames;
  std::size_t expected_points = 0;
  for (int i = 0; i < 150; ++i) {
    CanFrame f;
    f.timestamp = 0.01 * i;
    f.can_id = static_cast<std::uint32_t>(0x100 + rng.below(3));
    f.dlc = static_cast<std::uint8_t>(rng.below(9));
    expected_points += f.dlc;
    frames.push_back(std::move(f));
  }
  std::size_t points = 0;
  for (const SignalSeries& s : extract_signals(frames, SignalMap{})) {
    points += s.values.size();
  }
  CHECK(points == expected_points);
}

TEST_CASE("series order follows frame order per id") {
  std::vector<CanFrame> frames;
  for (int i = 0; i < 20; ++i) {
    CanFrame f;
    f.timestamp = 0.01 * i;
    f.can_id = i % 2 == 0 ? 0x100 : 0x200;
    f.dlc = 1;
    f.data[0] = static_cast<std::uint8_t>(i);
    frames.push_back(std::move(f));
  }
  for (const SignalSeries& s : extract_signals(frames, SignalMap{})) {
    std::vector<double> expected_ts;
    std::vector<double> expected_vals;
    for (const CanFrame& f : frames) {
      if (f.can_id == s.can_id) {
        expected_ts.push_back(f.timestamp);
        expected_vals.push_back(f.data[0]);
      }
    }
    CHECK(s.timestamps == expected_ts);
    CHECK(s.values == expected_vals);
  }
}

TEST_CASE("signal map json loads and validates") {
  const std::string good = R"({
    "0x4E7": [
      {"name": "speed", "start_bit": 0, "bit_length": 16,
       "byte_order": "big", "value_kind": "unsigned"}
    ]
  })";
  const SignalMap map = parse_signal_map_json(good);
  REQUIRE(map.find(0x4E7) != nullptr);
  CHECK(map.find(0x4E7)->at(0).name == "speed");

  const std::string bad = R"({
    "0x4E7": [
      {"name": "x", "start_bit": 60, "bit_length": 16,
       "byte_order": "big", "value_kind": "unsigned"}
    ]
  })";
  CHECK_THROWS_AS(parse_signal_map_json(bad), Error);
}

TEST_CASE("labeled csv round trips through the writer") {
  const auto frames = parse_labeled_csv(std::string(
      "timestamp,id,dlc,data0,data1,data2,data3,data4,data5,data6,data7,"
      "label\n"
      "0.10,0x4E7,2,17,34,0,0,0,0,0,0,0\n"
      "0.20,0x123,8,1,2,3,4,5,6,7,8,1\n"));
  const auto reparsed = parse_labeled_csv(to_labeled_csv(frames));
  CHECK(reparsed == frames);
}

}  // TEST_SUITE
