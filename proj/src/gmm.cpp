#include "athena/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "athena/errors.hpp"
#include "athena/util.hpp"

namespace athena {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

double log_normal_pdf(double x, double mean, double stdev) {
  const double z = (x - mean) / stdev;
  return -0.5 * kLogTwoPi - std::log(stdev) - 0.5 * z * z;
}

// Log of the per-component joint terms log(pi_k) + log N(x | mu_k, sigma_k).
void component_log_terms(const GmmModel& m, double x,
                         std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(m.component_count));
  for (int k = 0; k < m.component_count; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double log_pi = m.weights[ku] > 0.0
                              ? std::log(m.weights[ku])
                              : -std::numeric_limits<double>::infinity();
    out[ku] = log_pi + log_normal_pdf(x, m.means[ku], m.stdevs[ku]);
  }
}

double resolve_sigma_floor(const EmConfig& config,
                           std::span<const double> deltas) {
  if (config.sigma_floor > 0.0) return config.sigma_floor;
  return std::max(1e-6, 1e-3 * stdev_population(deltas));
}

std::size_t distinct_count(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return static_cast<std::size_t>(
      std::unique(values.begin(), values.end()) - values.begin());
}

struct EmFit {
  GmmModel model;
  double log_lik;
};

EmFit run_em(const DeltaSeries& series, int k, const EmConfig& config,
             double sigma_floor, std::span<const double> init_means) {
  const std::vector<double>& x = series.deltas;
  const auto n = x.size();
  const auto ku_count = static_cast<std::size_t>(k);

  GmmModel m;
  m.can_id = series.can_id;
  m.signal_name = series.signal_name;
  m.component_count = k;
  m.n_train = n;
  m.sigma_floor = sigma_floor;
  m.weights.assign(ku_count, 1.0 / k);
  m.means.assign(init_means.begin(), init_means.end());
  const double global_sigma =
      std::max(sigma_floor, stdev_population(x));
  m.stdevs.assign(ku_count, global_sigma);

  std::vector<double> terms;
  std::vector<std::vector<double>> resp(
      ku_count, std::vector<double>(n, 0.0));
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < config.max_iters; ++iter) {
    // E step
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      component_log_terms(m, x[i], terms);
      const double lse = log_sum_exp(terms);
      ll += lse;
      for (std::size_t j = 0; j < ku_count; ++j) {
        resp[j][i] = std::exp(terms[j] - lse);
      }
    }
    if (iter > 0 && std::abs(ll - prev_ll) < config.tol) {
      prev_ll = ll;
      break;
    }
    prev_ll = ll;

    // M step
    for (std::size_t j = 0; j < ku_count; ++j) {
      const double nk = std::accumulate(resp[j].begin(), resp[j].end(), 0.0);
      if (nk < 1e-12) {
        m.weights[j] = nk / static_cast<double>(n);
        continue;  // component starved; keep its parameters
      }
      double mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) mu += resp[j][i] * x[i];
      mu /= nk;
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        var += resp[j][i] * (x[i] - mu) * (x[i] - mu);
      }
      var /= nk;
      m.weights[j] = nk / static_cast<double>(n);
      m.means[j] = mu;
      m.stdevs[j] = std::max(sigma_floor, std::sqrt(var));
    }
    // Renormalize weights against starved-component drift.
    const double wsum =
        std::accumulate(m.weights.begin(), m.weights.end(), 0.0);
    if (wsum > 0.0) {
      for (double& w : m.weights) w /= wsum;
    }
  }

  // Final log-likelihood with the parameters we return.
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    component_log_terms(m, x[i], terms);
    ll += log_sum_exp(terms);
  }
  return {std::move(m), ll};
}

void canonicalize(GmmModel& m) {
  const auto k = static_cast<std::size_t>(m.component_count);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return m.means[a] < m.means[b];
                   });
  const auto permute = [&](std::vector<double>& v) {
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = v[order[i]];
    v = std::move(out);
  };
  permute(m.weights);
  permute(m.means);
  permute(m.stdevs);
}

// Fills min_membership and min_train_log_density from the training data.
void record_training_stats(GmmModel& m, std::span<const double> deltas) {
  const auto k = static_cast<std::size_t>(m.component_count);
  // Vacuous minimum for components that never win: 1.0 keeps the all-k
  // anomaly condition decidable by the live components.
  m.min_membership.assign(k, 1.0);
  m.min_train_log_density = std::numeric_limits<double>::infinity();
  for (double x : deltas) {
    const Responsibilities r = responsibilities(m, x);
    const auto win = static_cast<std::size_t>(r.component - 1);
    m.min_membership[win] = std::min(m.min_membership[win], r.r[win]);
    m.min_train_log_density = std::min(m.min_train_log_density, r.log_density);
  }
  if (deltas.empty()) {
    m.min_train_log_density = -std::numeric_limits<double>::infinity();
  }
}

}  // namespace

DeltaSeries compute_deltas(const SignalSeries& series) {
  if (series.values.size() < 2) {
    raise(Errc::kTooShort, "signal series needs at least 2 points");
  }
  DeltaSeries d;
  d.can_id = series.can_id;
  d.signal_name = series.signal_name;
  d.timestamps.reserve(series.values.size() - 1);
  d.deltas.reserve(series.values.size() - 1);
  for (std::size_t i = 1; i < series.values.size(); ++i) {
    d.timestamps.push_back(series.timestamps[i]);
    d.deltas.push_back(series.values[i] - series.values[i - 1]);
  }
  return d;
}

GmmModel fit_gmm_em(const DeltaSeries& deltas, int component_count,
                    std::uint64_t seed, const EmConfig& config) {
  if (component_count < 1) {
    raise(Errc::kInvalidSpec, "component count must be >= 1");
  }
  const std::vector<double>& x = deltas.deltas;
  if (x.size() < static_cast<std::size_t>(component_count)) {
    raise(Errc::kTooShort, "fewer deltas than components");
  }
  const std::size_t distinct = distinct_count(x);
  if (distinct == 1 && component_count > 1) {
    raise(Errc::kDegenerateInput,
          "all deltas identical; use a single component");
  }
  const double sigma_floor = resolve_sigma_floor(config, x);

  // Quantile-spaced initial means over the sorted deltas.
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> init(static_cast<std::size_t>(component_count));
  for (int k = 0; k < component_count; ++k) {
    init[static_cast<std::size_t>(k)] =
        quantile_sorted(sorted, (k + 0.5) / component_count);
  }

  EmFit best = run_em(deltas, component_count, config, sigma_floor, init);
  if (config.restarts > 0) {
    Rng rng(seed);
    const double spread = std::max(sigma_floor, stdev_population(x));
    for (int r = 0; r < config.restarts; ++r) {
      std::vector<double> perturbed = init;
      for (double& v : perturbed) v += rng.gaussian(0.0, spread);
      EmFit fit = run_em(deltas, component_count, config, sigma_floor,
                         perturbed);
      if (fit.log_lik > best.log_lik) best = std::move(fit);
    }
  }

  canonicalize(best.model);
  record_training_stats(best.model, x);
  return best.model;
}

double log_likelihood(const GmmModel& model, std::span<const double> deltas) {
  std::vector<double> terms;
  double ll = 0.0;
  for (double x : deltas) {
    component_log_terms(model, x, terms);
    ll += log_sum_exp(terms);
  }
  return ll;
}

double bic_score(const GmmModel& model, const DeltaSeries& deltas) {
  const auto n = static_cast<double>(deltas.deltas.size());
  const double kappa = 3.0 * model.component_count - 1.0;
  return -2.0 * log_likelihood(model, deltas.deltas) + kappa * std::log(n);
}

GmmModel select_model(const DeltaSeries& deltas, int k_max, std::uint64_t seed,
                      const EmConfig& config) {
  std::vector<BicCandidate> table;
  GmmModel best;
  bool have_best = false;
  const std::size_t distinct = distinct_count(deltas.deltas);
  for (int k = 1; k <= k_max; ++k) {
    if (static_cast<std::size_t>(k) > distinct) break;
    GmmModel candidate = fit_gmm_em(deltas, k, seed, config);
    candidate.bic = bic_score(candidate, deltas);
    if (!have_best || candidate.bic < best.bic) {
      best = std::move(candidate);
      have_best = true;
    }
  }
  if (!have_best) raise(Errc::kTooShort, "no candidate model could be fit");
  return best;
}

std::vector<BicCandidate> bic_table(const DeltaSeries& deltas, int k_max,
                                    std::uint64_t seed,
                                    const EmConfig& config) {
  std::vector<BicCandidate> table;
  const std::size_t distinct = distinct_count(deltas.deltas);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_max; ++k) {
    if (static_cast<std::size_t>(k) > distinct) break;
    GmmModel candidate = fit_gmm_em(deltas, k, seed, config);
    const double bic = bic_score(candidate, deltas);
    table.push_back({k, bic, false});
    best = std::min(best, bic);
  }
  for (BicCandidate& c : table) {
    if (c.bic == best) {
      c.selected = true;  // ties toward smaller K: mark first only
      break;
    }
  }
  return table;
}

Responsibilities responsibilities(const GmmModel& model, double delta) {
  Responsibilities out;
  std::vector<double> terms;
  component_log_terms(model, delta, terms);
  out.log_density = log_sum_exp(terms);
  out.r.resize(terms.size());
  int arg = 0;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    out.r[j] = std::exp(terms[j] - out.log_density);
    if (out.r[j] > out.r[static_cast<std::size_t>(arg)]) {
      arg = static_cast<int>(j);
    }
  }
  out.component = arg + 1;
  return out;
}

std::vector<PovLabel> label_povs(const GmmModel& model,
                                 const DeltaSeries& deltas) {
  std::vector<PovLabel> labels;
  labels.reserve(deltas.deltas.size());
  for (std::size_t i = 0; i < deltas.deltas.size(); ++i) {
    const Responsibilities r = responsibilities(model, deltas.deltas[i]);
    labels.push_back({deltas.timestamps[i], r.component,
                      r.r[static_cast<std::size_t>(r.component - 1)]});
  }
  return labels;
}

}  // namespace athena
