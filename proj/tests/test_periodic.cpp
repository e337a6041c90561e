#include <doctest.h>

#include <cmath>
#include <set>

#include "athena/errors.hpp"
#include "athena/periodic.hpp"
#include "athena/util.hpp"

using namespace athena;

namespace {

PeriodEstimate make_estimate(std::uint32_t id, double median, double iqr = 0) {
  return {id, median, iqr, 100};
}

}  // namespace

TEST_SUITE("periodic_cluster") {

TEST_CASE("constant 0.10s stream estimates cleanly") {
  const std::vector<double> ts{0.0, 0.1, 0.2, 0.3};
  const PeriodEstimate est = estimate_period(0x4E7, ts);
  CHECK(est.median_interval == doctest::Approx(0.10));
  CHECK(est.interval_iqr == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(est.sample_count == 4);
}

TEST_CASE("two frames give one interval") {
  const std::vector<double> ts{0.0, 1.0};
  const PeriodEstimate est = estimate_period(0x1, ts);
  CHECK(est.median_interval == 1.0);
  CHECK(est.interval_iqr == 0.0);
  CHECK(est.sample_count == 2);
}

TEST_CASE("one frame is too few") {
  const std::vector<double> ts{0.5};
  try {
    estimate_period(0x1, ts);
    FAIL("expected TooFewFrames");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kTooFewFrames);
  }
}

TEST_CASE("grouped estimation excludes and reports short ids") {
  std::map<std::uint32_t, std::vector<double>> by_id;
  by_id[0x100] = {0.0, 0.1, 0.2};
  by_id[0x200] = {0.5};
  const PeriodEstimationResult result = estimate_periods(by_id);
  REQUIRE(result.estimates.size() == 1);
  CHECK(result.estimates[0].can_id == 0x100);
  REQUIRE(result.skipped.size() == 1);
  CHECK(result.skipped[0].can_id == 0x200);
  CHECK(result.skipped[0].reason == PeriodSkipReason::kTooFewFrames);
}

TEST_CASE("clear period separation splits clusters") {
  const std::vector<PeriodEstimate> estimates{
      make_estimate(0xA, 0.10), make_estimate(0xB, 0.10),
      make_estimate(0xC, 1.0)};
  const auto clusters = cluster_by_period(estimates, 0.15);
  REQUIRE(clusters.size() == 2);
  CHECK(clusters[0].member_ids == std::vector<std::uint32_t>{0xA, 0xB});
  CHECK(clusters[1].member_ids == std::vector<std::uint32_t>{0xC});
  CHECK(clusters[0].cluster_id == 0);
  CHECK(clusters[1].cluster_id == 1);
}

TEST_CASE("0.11 joins 0.10 at 15 percent tolerance") {
  // hand oracle: 0.11 / 0.10 = 1.1 <= 1.15
  REQUIRE(0.11 / 0.10 <= 1.15);
  const std::vector<PeriodEstimate> estimates{make_estimate(0xA, 0.10),
                                              make_estimate(0xB, 0.11)};
  const auto clusters = cluster_by_period(estimates, 0.15);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].member_ids.size() == 2);
}

TEST_CASE("empty input gives empty output") {
  CHECK(cluster_by_period({}, 0.15).empty());
}

TEST_CASE("aperiodic ids stay in singleton clusters") {
  const std::vector<PeriodEstimate> estimates{
      make_estimate(0xA, 0.10, 0.0),
      make_estimate(0xB, 0.10, 0.5)};  // iqr > median: event-triggered
  const auto clusters = cluster_by_period(estimates, 0.15);
  REQUIRE(clusters.size() == 2);
  for (const PeriodicCluster& c : clusters) {
    CHECK(c.member_ids.size() == 1);
  }
}

TEST_CASE("partition property: every id in exactly one cluster") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PeriodEstimate> estimates;
    const int n = 1 + static_cast<int>(rng.below(20));
    for (int i = 0; i < n; ++i) {
      const double period = std::pow(10.0, rng.uniform(-3.0, 1.0));
      estimates.push_back(make_estimate(static_cast<std::uint32_t>(i),
                                        period,
                                        rng.uniform(0.0, 2.0 * period)));
    }
    const auto clusters = cluster_by_period(estimates, 0.15);
    std::set<std::uint32_t> seen;
    for (const PeriodicCluster& c : clusters) {
      for (std::uint32_t id : c.member_ids) {
        CHECK(seen.insert(id).second);
      }
    }
    CHECK(seen.size() == estimates.size());
  }
}

TEST_CASE("scale invariance of cluster membership") {
  Rng rng(13);
  for (double scale : {3.0, 0.25, 1000.0}) {
    std::vector<PeriodEstimate> base, scaled;
    for (int i = 0; i < 15; ++i) {
      const double period = std::pow(10.0, rng.uniform(-2.0, 0.5));
      const double iqr = rng.uniform(0.0, 1.5 * period);
      base.push_back(make_estimate(static_cast<std::uint32_t>(i), period, iqr));
      scaled.push_back(make_estimate(static_cast<std::uint32_t>(i),
                                     period * scale, iqr * scale));
    }
    const auto a = cluster_by_period(base, 0.15);
    const auto b = cluster_by_period(scaled, 0.15);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].member_ids == b[i].member_ids);
    }
  }
}

TEST_CASE("deterministic ordering and ids") {
  const std::vector<PeriodEstimate> estimates{
      make_estimate(0x30, 0.5), make_estimate(0x10, 0.1),
      make_estimate(0x20, 0.1)};
  const auto a = cluster_by_period(estimates, 0.15);
  const auto b = cluster_by_period(estimates, 0.15);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].cluster_id == b[i].cluster_id);
    CHECK(a[i].member_ids == b[i].member_ids);
    CHECK(a[i].representative_period == b[i].representative_period);
  }
  // ordered by representative period ascending
  for (std::size_t i = 1; i < a.size(); ++i) {
    CHECK(a[i - 1].representative_period <= a[i].representative_period);
  }
}

}  // TEST_SUITE
