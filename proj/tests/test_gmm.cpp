#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "athena/errors.hpp"
#include "athena/gmm.hpp"
#include "athena/util.hpp"

using namespace athena;

namespace {

SignalSeries make_series(std::vector<double> values) {
  SignalSeries s;
  s.can_id = 0x4E7;
  s.signal_name = "byte0";
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.timestamps.push_back(0.1 * static_cast<double>(i));
  }
  s.values = std::move(values);
  return s;
}

DeltaSeries make_deltas(std::vector<double> deltas) {
  DeltaSeries d;
  d.can_id = 0x4E7;
  d.signal_name = "byte0";
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    d.timestamps.push_back(0.1 * static_cast<double>(i + 1));
  }
  d.deltas = std::move(deltas);
  return d;
}

// Two-mode sample used across the recovery and BIC tests.
DeltaSeries bimodal_sample(std::uint64_t seed, std::size_t n = 500) {
  Rng rng(seed);
  std::vector<double> deltas;
  deltas.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = rng.coin() ? 10.0 : -10.0;
    deltas.push_back(rng.gaussian(mean, 1.0));
  }
  return make_deltas(std::move(deltas));
}

double direct_log_normal(double x, double mu, double sigma) {
  return -0.5 * std::log(2.0 * M_PI) - std::log(sigma) -
         0.5 * (x - mu) * (x - mu) / (sigma * sigma);
}

}  // namespace

TEST_SUITE("pov_model") {

TEST_CASE("compute_deltas") {
  CHECK(compute_deltas(make_series({5, 5, 5})).deltas ==
        std::vector<double>{0, 0});
  CHECK(compute_deltas(make_series({1, 3, 2})).deltas ==
        std::vector<double>{2, -1});
  try {
    compute_deltas(make_series({7}));
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kTooShort);
  }
}

TEST_CASE("delta timestamps are the later frame's") {
  const DeltaSeries d = compute_deltas(make_series({1, 2, 3}));
  CHECK(d.timestamps == std::vector<double>{0.1, 0.2});
}

TEST_CASE("constant data fits a floor-width single component") {
  const DeltaSeries d = make_deltas(std::vector<double>(50, 0.0));
  const GmmModel m = fit_gmm_em(d, 1, 0);
  CHECK(m.component_count == 1);
  CHECK(m.means[0] == doctest::Approx(0.0));
  CHECK(m.weights[0] == doctest::Approx(1.0));
  CHECK(m.stdevs[0] == m.sigma_floor);
  CHECK(m.sigma_floor > 0.0);
}

TEST_CASE("identical deltas reject K > 1") {
  const DeltaSeries d = make_deltas(std::vector<double>(100, 3.0));
  try {
    fit_gmm_em(d, 2, 0);
    FAIL("expected DegenerateInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kDegenerateInput);
  }
}

TEST_CASE("seeded two-mode sample recovers the generating parameters") {
  const DeltaSeries d = bimodal_sample(1234);
  const GmmModel m = fit_gmm_em(d, 2, 0);
  REQUIRE(m.component_count == 2);
  CHECK(m.means[0] == doctest::Approx(-10.0).epsilon(0.05));
  CHECK(m.means[1] == doctest::Approx(10.0).epsilon(0.05));
  CHECK(std::abs(m.means[0] + 10.0) < 0.5);
  CHECK(std::abs(m.means[1] - 10.0) < 0.5);
  CHECK(std::abs(m.weights[0] - 0.5) < 0.1);
  CHECK(std::abs(m.weights[1] - 0.5) < 0.1);
}

TEST_CASE("bic matches the closed form for K = 1") {
  const DeltaSeries d = bimodal_sample(99, 100);
  GmmModel m = fit_gmm_em(d, 1, 0);
  double ll = 0.0;
  for (double x : d.deltas) ll += direct_log_normal(x, m.means[0], m.stdevs[0]);
  const double expected = -2.0 * ll + 2.0 * std::log(100.0);  // kappa = 2
  CHECK(bic_score(m, d) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("equal-likelihood K=2 pays exactly 3 log n more") {
  const DeltaSeries d = bimodal_sample(77, 200);
  const GmmModel m1 = fit_gmm_em(d, 1, 0);
  // Mixture of two copies of the same gaussian has the same density.
  GmmModel m2 = m1;
  m2.component_count = 2;
  m2.weights = {0.5, 0.5};
  m2.means = {m1.means[0], m1.means[0]};
  m2.stdevs = {m1.stdevs[0], m1.stdevs[0]};
  m2.min_membership = {1.0, 1.0};
  const double diff = bic_score(m2, d) - bic_score(m1, d);
  CHECK(diff == doctest::Approx(3.0 * std::log(200.0)).epsilon(1e-9));
}

TEST_CASE("bic prefers two components on two-mode data") {
  const DeltaSeries d = bimodal_sample(4321);
  const GmmModel m1 = fit_gmm_em(d, 1, 0);
  const GmmModel m2 = fit_gmm_em(d, 2, 0);
  CHECK(bic_score(m2, d) < bic_score(m1, d));

  const GmmModel selected = select_model(d, 5, 0);
  CHECK(selected.component_count == 2);
}

TEST_CASE("constant deltas select K = 1") {
  const DeltaSeries d = make_deltas(std::vector<double>(30, 0.0));
  CHECK(select_model(d, 5, 0).component_count == 1);
}

TEST_CASE("five distinct deltas evaluate candidates K = 1..5") {
  const DeltaSeries d = make_deltas({1, 2, 3, 4, 5});
  const auto table = bic_table(d, 5, 0);
  REQUIRE(table.size() == 5);
  int selected = 0;
  double best = table[0].bic;
  for (const BicCandidate& c : table) best = std::min(best, c.bic);
  for (const BicCandidate& c : table) {
    if (c.selected) {
      ++selected;
      CHECK(c.bic == best);
    }
  }
  CHECK(selected == 1);
  CHECK(select_model(d, 5, 0).bic == doctest::Approx(best));
}

TEST_CASE("label_povs on K = 1 gives responsibility one") {
  const DeltaSeries d = make_deltas({0, 0.5, -0.5, 1});
  const GmmModel m = fit_gmm_em(d, 1, 0);
  for (const PovLabel& label : label_povs(m, d)) {
    CHECK(label.component == 1);
    CHECK(label.responsibility == doctest::Approx(1.0));
  }
}

TEST_CASE("symmetric tie breaks toward the smaller component") {
  GmmModel m;
  m.component_count = 2;
  m.weights = {0.5, 0.5};
  m.means = {-1.0, 1.0};
  m.stdevs = {0.5, 0.5};
  m.min_membership = {1.0, 1.0};
  const Responsibilities r = responsibilities(m, 0.0);
  CHECK(r.r[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.r[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.component == 1);
}

TEST_CASE("point at a well-separated mean is fully owned") {
  const DeltaSeries d = bimodal_sample(55);
  const GmmModel m = fit_gmm_em(d, 2, 0);
  const Responsibilities r = responsibilities(m, m.means[1]);
  CHECK(r.component == 2);
  CHECK(r.r[1] > 0.99);
}

TEST_CASE("responsibilities sum to one everywhere") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    GmmModel m;
    m.component_count = 1 + static_cast<int>(rng.below(4));
    double wsum = 0.0;
    for (int k = 0; k < m.component_count; ++k) {
      m.weights.push_back(rng.uniform(0.05, 1.0));
      wsum += m.weights.back();
      m.means.push_back(rng.uniform(-50.0, 50.0));
      m.stdevs.push_back(rng.uniform(0.01, 5.0));
      m.min_membership.push_back(1.0);
    }
    for (double& w : m.weights) w /= wsum;
    const double x = rng.uniform(-100.0, 100.0);
    const Responsibilities r = responsibilities(m, x);
    double sum = 0.0;
    for (double v : r.r) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("em log-likelihood is non-decreasing across iterations") {
  const DeltaSeries d = bimodal_sample(31, 120);
  double previous = -1e300;
  for (int iters = 1; iters <= 15; ++iters) {
    EmConfig config;
    config.max_iters = iters;
    config.tol = 0.0;  // run exactly `iters` iterations
    const GmmModel m = fit_gmm_em(d, 2, 0, config);
    const double ll = log_likelihood(m, d.deltas);
    CHECK(ll >= previous - 1e-8);
    previous = ll;
  }
}

TEST_CASE("components come out sorted and refitting is identical") {
  const DeltaSeries d = bimodal_sample(8);
  const GmmModel a = fit_gmm_em(d, 3, 0);
  const GmmModel b = fit_gmm_em(d, 3, 0);
  CHECK(std::is_sorted(a.means.begin(), a.means.end()));
  CHECK(a.means == b.means);
  CHECK(a.weights == b.weights);
  CHECK(a.stdevs == b.stdevs);
  CHECK(a.min_membership == b.min_membership);
}

TEST_CASE("min_membership matches a brute-force recheck") {
  const DeltaSeries d = bimodal_sample(17, 300);
  const GmmModel m = fit_gmm_em(d, 2, 0);
  std::map<int, double> minima;
  double min_density = 1e300;
  for (double x : d.deltas) {
    const Responsibilities r = responsibilities(m, x);
    const double win = r.r[static_cast<std::size_t>(r.component - 1)];
    auto it = minima.find(r.component);
    if (it == minima.end() || win < it->second) minima[r.component] = win;
    min_density = std::min(min_density, r.log_density);
  }
  for (int k = 1; k <= m.component_count; ++k) {
    const auto ku = static_cast<std::size_t>(k - 1);
    if (minima.count(k)) {
      CHECK(m.min_membership[ku] == minima[k]);
    } else {
      CHECK(m.min_membership[ku] == 1.0);
    }
  }
  CHECK(m.min_train_log_density == min_density);
}

TEST_CASE("shifting raw values leaves the model unchanged") {
  SignalSeries base = make_series({10, 14, 9, 30, 22, 40, 12, 50});
  SignalSeries shifted = base;
  for (double& v : shifted.values) v += 1000.0;
  const DeltaSeries da = compute_deltas(base);
  const DeltaSeries db = compute_deltas(shifted);
  CHECK(da.deltas == db.deltas);
  const GmmModel ma = select_model(da, 3, 0);
  const GmmModel mb = select_model(db, 3, 0);
  CHECK(ma.means == mb.means);
  CHECK(ma.weights == mb.weights);
  CHECK(ma.stdevs == mb.stdevs);
}

}  // TEST_SUITE
