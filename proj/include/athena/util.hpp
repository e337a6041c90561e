#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace athena {

// Deterministic random source. mt19937_64 is bit-exact across platforms; the
// gaussian/uniform mappings below are ours so that generated traffic and
// fitted models reproduce byte-identically everywhere (std::*_distribution
// is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of entropy.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  bool coin() { return (engine_() & 1u) != 0; }

  // Box-Muller; second value of the pair is cached.
  double gaussian(double mean, double stdev);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Type-7 quantile (linear interpolation between closest ranks) on a sorted
// range; p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

double median(std::vector<double> values);          // copies and sorts
double mean(std::span<const double> values);
double stdev_population(std::span<const double> values);

double log_sum_exp(std::span<const double> logs);

// FNV-1a 64-bit, used for dataset/model digests embedded in rule banks.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t fnv1a64(const std::string& text);
std::string digest_hex(std::uint64_t digest);

std::string hex_id(std::uint32_t can_id);           // "0x4E7" style
std::uint32_t parse_hex_id(const std::string& text);  // accepts 0x4E7 / 4E7

std::string format_seconds(double t);               // %.6f, microsecond grid

// Write-temp-then-rename so failed runs never leave partial artifacts.
void atomic_write_file(const std::filesystem::path& path,
                       const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace athena
