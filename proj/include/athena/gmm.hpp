#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "athena/frame.hpp"

namespace athena {

// Consecutive updates of one decoded signal: deltas[i] = x[i+1] - x[i].
// timestamps hold the later frame's time of each pair.
struct DeltaSeries {
  std::uint32_t can_id = 0;
  std::string signal_name;
  std::vector<double> timestamps;
  std::vector<double> deltas;
};

struct EmConfig {
  int max_iters = 200;
  double tol = 1e-6;       // log-likelihood convergence tolerance
  double sigma_floor = 0;  // 0 = auto: max(1e-6, 1e-3 * stdev(deltas))
  int restarts = 0;        // extra perturbed restarts, best likelihood wins
};

// Per-signal K-component mixture, the PoV generator. Components are kept
// sorted by mean ascending. min_membership[k] is the smallest winning
// responsibility observed for component k on training data; together with
// min_train_log_density it drives the detection-time membership test.
struct GmmModel {
  std::uint32_t can_id = 0;
  std::string signal_name;
  int component_count = 0;
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stdevs;
  std::vector<double> min_membership;
  double bic = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_train = 0;
  double sigma_floor = 0.0;
  double min_train_log_density = -std::numeric_limits<double>::infinity();
};

// Per-timestep component assignment with its (max) responsibility.
struct PovLabel {
  double timestamp = 0.0;
  int component = 1;  // 1-based
  double responsibility = 1.0;
};

struct Responsibilities {
  std::vector<double> r;   // size K, sums to 1
  int component = 1;       // argmax, 1-based, ties toward smaller k
  double log_density = 0;  // log mixture density of the input
};

DeltaSeries compute_deltas(const SignalSeries& series);  // TooShort below 2 pts

// One EM fit at fixed K. Quantile-spaced means, uniform weights, global
// stdev initialization; each stdev is clamped to sigma_floor after every
// M step. Throws DegenerateInput when all deltas are identical and K > 1.
GmmModel fit_gmm_em(const DeltaSeries& deltas, int component_count,
                    std::uint64_t seed, const EmConfig& config = {});

// -2 log p(data | model) + kappa log(n), kappa = 3K - 1.
double bic_score(const GmmModel& model, const DeltaSeries& deltas);

// Fits K = 1..k_max (skipping K above the distinct-delta count) and returns
// the minimum-BIC candidate, ties toward smaller K.
GmmModel select_model(const DeltaSeries& deltas, int k_max = 5,
                      std::uint64_t seed = 0, const EmConfig& config = {});

// Candidate BIC table from select_model, for diagnostics.
struct BicCandidate {
  int component_count;
  double bic;
  bool selected;
};
std::vector<BicCandidate> bic_table(const DeltaSeries& deltas, int k_max = 5,
                                    std::uint64_t seed = 0,
                                    const EmConfig& config = {});

// Normalized posterior membership per component, computed in log space.
Responsibilities responsibilities(const GmmModel& model, double delta);

double log_likelihood(const GmmModel& model, std::span<const double> deltas);

std::vector<PovLabel> label_povs(const GmmModel& model,
                                 const DeltaSeries& deltas);

}  // namespace athena
