#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace athena {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

Confusion confusion(const std::vector<bool>& predicted,
                    const std::vector<bool>& actual);  // LengthMismatch

struct ScalarMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Zero-denominator cases return 0 by convention and set the flag.
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
};

ScalarMetrics scalar_metrics(const Confusion& c);  // EmptyInput when total 0

struct RocResult {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0)..(1,1)
  double auc = 0.0;
};

// Threshold sweep over distinct scores descending, ties grouped into one
// step; trapezoidal AUC. Throws SingleClass without both classes present.
RocResult roc_auc(std::span<const double> scores,
                  const std::vector<bool>& actual);

struct MetricsReport {
  std::string unit = "frame";  // scoring unit: frame or window
  Confusion counts;
  ScalarMetrics scalars;
  std::optional<RocResult> roc;  // absent for score-free rule detectors
  std::map<std::string, std::string> meta;
};

// Schema "athena-report-1".
std::string report_json(const MetricsReport& report);

// JSON report plus an optional fpr,tpr CSV for external plotting. Writes are
// atomic; throws IoError.
void emit_report(const MetricsReport& report,
                 const std::filesystem::path& json_path,
                 const std::optional<std::filesystem::path>& roc_csv_path = {});

}  // namespace athena
