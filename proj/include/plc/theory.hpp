#pragma once

#include <cstdint>
#include <vector>

#include "plc/correction.hpp"
#include "plc/datagen.hpp"
#include "plc/model.hpp"

namespace plc {

/// Histogram estimate of the margin density g(t) over [0, 1/2], with the
/// min/max bin densities standing in for the (c_*, c^*) bounds.
struct MarginProfile {
  int bins = 0;
  std::int64_t samples = 0;
  std::vector<double> bin_edges;   // bins + 1 entries
  std::vector<std::int64_t> counts;
  std::vector<double> density;     // counts / (n * width)
  double c_low = 0.0;              // min bin density
  double c_high = 0.0;             // max bin density
  double imbalance = 0.0;          // c_high / c_low; +inf when a bin is empty
  std::vector<int> zero_mass_bins;
};

/// Derived parameter conditions. The minimum-round and end-threshold
/// conditions each have two conventions in circulation; both are computed.
struct TheoremParams {
  double alpha = 0.0, eps = 0.0, ell = 0.0, t0 = 0.0, T0 = 0.0, beta = 0.0;
  double e0 = 0.0;
  double m_min_raw = 0.0;  // (ell*alpha/eps) * log(2 T0 / (1 - 2 e0)), before clamping
  std::int64_t m_min = 0;
  bool m_min_vacuous = false;  // the logarithm was non-positive
  double n_min_a = 0.0;        // m_min + (1/beta) log(T0 / (3 eps))
  double n_min_b = 0.0;        // m_min + (1/beta) log((1 - 6 eps) / (2 T0))
  double t_end_max_a = 0.0;    // 3 eps
  double t_end_max_b = 0.0;    // 1/2 - 3 eps
  double beta_low = 0.0;       // eps / (alpha * ell)
  double beta_high = 0.0;      // 2 eps / (alpha * ell)
  bool beta_in_window = false;
};

struct PureLevelResult {
  bool exists = false;
  double level = 0.0;
};

/// Fraction of working labels agreeing with the Bayes labels.
double purity(const std::vector<int>& working_labels, const std::vector<int>& bayes_labels);

/// Smallest empirical margin e such that every sample point with margin >= e
/// has predicted label equal to the Bayes label. Returns {true, 0} when the
/// whole sample agrees and {false, _} when even the largest-margin point
/// disagrees.
PureLevelResult min_pure_level(const std::vector<int>& predicted_labels,
                               const std::vector<double>& margins,
                               const std::vector<int>& bayes_labels);

PureLevelResult min_pure_level(const SoftmaxClassifier& classifier, const PosteriorOracle& oracle,
                               const WorkingDataset& dataset);

MarginProfile margin_density(const std::vector<double>& margins, int bins);
MarginProfile margin_density(const PosteriorOracle& oracle, const Matrix& features, int bins);

/// e0 = max(t0, (alpha + eps) / (1 + 2 alpha)). Accepts eps = 0.
double compute_e0(double alpha, double eps, double t0);

/// Evaluates the parameter conditions for the given consistency and density
/// constants. Throws when T0 >= 1/2 - e0 (condition (1) infeasible).
TheoremParams theorem_bounds(double alpha, double eps, double ell, double t0, double T0,
                             double beta);

struct Lemma1Round {
  int round = 0;
  bool applicable = false;  // both this and the previous round had a pure level
  double level_prev = 0.0;
  double level_new = 0.0;
  double growth_ratio = 0.0;  // (1/2 - e_new) / (1/2 - e_prev)
  bool bound_met = false;
};

struct Lemma1Trace {
  double alpha = 0.0, eps = 0.0, ell = 0.0;
  double required_ratio = 0.0;  // 1 + eps / (alpha * ell)
  std::vector<Lemma1Round> rounds;
  std::int64_t rounds_applicable = 0;
  std::int64_t rounds_met = 0;
};

/// Per-round growth of the pure-region width against the one-round
/// improvement bound. Requires oracle-backed round records.
Lemma1Trace lemma1_trace(const std::vector<RoundRecord>& rounds, double alpha, double eps,
                         double ell);

}  // namespace plc
