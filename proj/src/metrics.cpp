#include "athena/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "athena/errors.hpp"
#include "athena/util.hpp"

namespace athena {

Confusion confusion(const std::vector<bool>& predicted,
                    const std::vector<bool>& actual) {
  if (predicted.size() != actual.size()) {
    raise(Errc::kLengthMismatch, "predicted and actual lengths differ");
  }
  Confusion c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (actual[i]) {
      (predicted[i] ? c.tp : c.fn) += 1;
    } else {
      (predicted[i] ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

ScalarMetrics scalar_metrics(const Confusion& c) {
  if (c.total() == 0) raise(Errc::kEmptyInput, "no scored units");
  ScalarMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) /
               static_cast<double>(c.total());

  if (c.tp + c.fp == 0) {
    m.precision_degenerate = true;
  } else {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    m.recall_degenerate = true;
  } else {
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  if (m.precision + m.recall == 0.0) {
    m.f1_degenerate = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

RocResult roc_auc(std::span<const double> scores,
                  const std::vector<bool>& actual) {
  if (scores.size() != actual.size()) {
    raise(Errc::kLengthMismatch, "scores and actual lengths differ");
  }
  std::size_t positives = 0;
  for (bool a : actual) positives += a ? 1 : 0;
  const std::size_t negatives = actual.size() - positives;
  if (positives == 0 || negatives == 0) {
    raise(Errc::kSingleClass, "roc needs both classes");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocResult out;
  out.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  double auc = 0.0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    // Group score ties into one threshold step.
    while (i < order.size() && scores[order[i]] == threshold) {
      (actual[order[i]] ? tp : fp) += 1;
      ++i;
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
    const double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    out.points.emplace_back(fpr, tpr);
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  out.auc = auc;
  return out;
}

std::string report_json(const MetricsReport& report) {
  nlohmann::json doc;
  doc["schema_version"] = "athena-report-1";
  doc["unit"] = report.unit;
  doc["tp"] = report.counts.tp;
  doc["fp"] = report.counts.fp;
  doc["tn"] = report.counts.tn;
  doc["fn"] = report.counts.fn;
  doc["accuracy"] = report.scalars.accuracy;
  doc["precision"] = report.scalars.precision;
  doc["recall"] = report.scalars.recall;
  doc["f1"] = report.scalars.f1;
  nlohmann::json flags = nlohmann::json::array();
  if (report.scalars.precision_degenerate) flags.push_back("precision_zero_denominator");
  if (report.scalars.recall_degenerate) flags.push_back("recall_zero_denominator");
  if (report.scalars.f1_degenerate) flags.push_back("f1_zero_denominator");
  doc["degenerate"] = std::move(flags);
  if (report.roc) {
    doc["auc"] = report.roc->auc;
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [fpr, tpr] : report.roc->points) {
      points.push_back(nlohmann::json::array({fpr, tpr}));
    }
    doc["roc_points"] = std::move(points);
  } else {
    doc["auc"] = nullptr;
    doc["roc_points"] = nlohmann::json::array();
  }
  nlohmann::json meta = nlohmann::json::object();
  for (const auto& [k, v] : report.meta) meta[k] = v;
  doc["meta"] = std::move(meta);
  return doc.dump(2) + "\n";
}

void emit_report(const MetricsReport& report,
                 const std::filesystem::path& json_path,
                 const std::optional<std::filesystem::path>& roc_csv_path) {
  atomic_write_file(json_path, report_json(report));
  if (roc_csv_path) {
    std::string csv = "fpr,tpr\n";
    char buf[80];
    if (report.roc) {
      for (const auto& [fpr, tpr] : report.roc->points) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", fpr, tpr);
        csv += buf;
      }
    }
    atomic_write_file(*roc_csv_path, csv);
  }
}

}  // namespace athena
