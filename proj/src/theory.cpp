#include "plc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "plc/errors.hpp"
#include "plc/parallel.hpp"

namespace plc {

double purity(const std::vector<int>& working_labels, const std::vector<int>& bayes_labels) {
  if (working_labels.size() != bayes_labels.size())
    throw ValidationError("purity: label vectors must have equal length");
  if (working_labels.empty()) throw ValidationError("purity: empty label vectors");
  const auto n = static_cast<std::int64_t>(working_labels.size());
  const std::int64_t hits = par::count_indexed(n, [&](std::int64_t i) {
    return working_labels[static_cast<std::size_t>(i)] == bayes_labels[static_cast<std::size_t>(i)];
  });
  return static_cast<double>(hits) / static_cast<double>(n);
}

PureLevelResult min_pure_level(const std::vector<int>& predicted_labels,
                               const std::vector<double>& margins,
                               const std::vector<int>& bayes_labels) {
  const std::size_t n = margins.size();
  if (n == 0) throw ValidationError("min_pure_level: empty dataset");
  if (predicted_labels.size() != n || bayes_labels.size() != n)
    throw ValidationError("min_pure_level: length mismatch");

  // Largest margin among disagreeing points; the pure level is the smallest
  // sample margin strictly above it.
  double worst_disagreement = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (predicted_labels[i] != bayes_labels[i])
      worst_disagreement = std::max(worst_disagreement, margins[i]);
  }
  if (worst_disagreement < 0.0) return {true, 0.0};

  double level = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (margins[i] > worst_disagreement) level = std::min(level, margins[i]);
  }
  if (!std::isfinite(level)) return {false, 0.0};
  return {true, level};
}

PureLevelResult min_pure_level(const SoftmaxClassifier& classifier, const PosteriorOracle& oracle,
                               const WorkingDataset& dataset) {
  if (oracle.num_classes() != 2)
    throw ValidationError("min_pure_level: binary oracle required");
  return min_pure_level(classifier.predict_labels(dataset.features),
                        oracle.margins(dataset.features), dataset.bayes_labels);
}

MarginProfile margin_density(const std::vector<double>& margins, int bins) {
  if (bins < 5) throw ValidationError("margin_density: at least 5 bins required");
  MarginProfile profile;
  profile.bins = bins;
  profile.samples = static_cast<std::int64_t>(margins.size());
  if (margins.empty()) throw ValidationError("margin_density: no margins");

  const double width = 0.5 / bins;
  profile.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) profile.bin_edges[static_cast<std::size_t>(b)] = b * width;
  profile.counts.assign(static_cast<std::size_t>(bins), 0);

  for (double t : margins) {
    if (!(t >= 0.0 && t <= 0.5 + 1e-12))
      throw ValidationError("margin_density: margin outside [0, 1/2]");
    int b = static_cast<int>(t / width);
    if (b >= bins) b = bins - 1;  // t == 1/2 lands in the last bin
    ++profile.counts[static_cast<std::size_t>(b)];
  }

  profile.density.resize(static_cast<std::size_t>(bins));
  const double denom = static_cast<double>(margins.size()) * width;
  for (int b = 0; b < bins; ++b) {
    profile.density[static_cast<std::size_t>(b)] =
        static_cast<double>(profile.counts[static_cast<std::size_t>(b)]) / denom;
    if (profile.counts[static_cast<std::size_t>(b)] == 0) profile.zero_mass_bins.push_back(b);
  }
  profile.c_low = *std::min_element(profile.density.begin(), profile.density.end());
  profile.c_high = *std::max_element(profile.density.begin(), profile.density.end());
  profile.imbalance = profile.c_low > 0.0 ? profile.c_high / profile.c_low
                                          : std::numeric_limits<double>::infinity();
  return profile;
}

MarginProfile margin_density(const PosteriorOracle& oracle, const Matrix& features, int bins) {
  if (oracle.num_classes() != 2)
    throw ValidationError("margin_density: binary oracle required");
  return margin_density(oracle.margins(features), bins);
}

double compute_e0(double alpha, double eps, double t0) {
  return std::max(t0, (alpha + eps) / (1.0 + 2.0 * alpha));
}

TheoremParams theorem_bounds(double alpha, double eps, double ell, double t0, double T0,
                             double beta) {
  if (!(alpha > 0.0)) throw ValidationError("theorem_bounds: alpha must be positive");
  if (!(eps > 0.0 && eps < 0.5)) throw ValidationError("theorem_bounds: eps must lie in (0, 1/2)");
  if (!(ell >= 1.0)) throw ValidationError("theorem_bounds: ell must be >= 1");
  if (!(t0 > 0.0 && t0 < 0.5)) throw ValidationError("theorem_bounds: t0 must lie in (0, 1/2)");
  if (!(beta > 0.0)) throw ValidationError("theorem_bounds: beta must be positive");
  if (!(T0 > 0.0 && T0 < 0.5)) throw ValidationError("theorem_bounds: T0 must lie in (0, 1/2)");

  TheoremParams params;
  params.alpha = alpha;
  params.eps = eps;
  params.ell = ell;
  params.t0 = t0;
  params.T0 = T0;
  params.beta = beta;
  params.e0 = compute_e0(alpha, eps, t0);

  if (!(T0 < 0.5 - params.e0)) {
    throw ValidationError(
        "theorem_bounds: condition (1) infeasible, T0 must be below 1/2 - e0 = " +
        std::to_string(0.5 - params.e0));
  }

  params.m_min_raw = (ell * alpha / eps) * std::log(2.0 * T0 / (1.0 - 2.0 * params.e0));
  params.m_min_vacuous = params.m_min_raw <= 0.0;
  params.m_min = params.m_min_vacuous ? 0 : static_cast<std::int64_t>(std::ceil(params.m_min_raw));

  const double m = static_cast<double>(params.m_min);
  params.n_min_a = std::max(m, m + std::log(T0 / (3.0 * eps)) / beta);
  params.n_min_b = std::max(m, m + std::log((1.0 - 6.0 * eps) / (2.0 * T0)) / beta);
  params.t_end_max_a = 3.0 * eps;
  params.t_end_max_b = 0.5 - 3.0 * eps;
  params.beta_low = eps / (alpha * ell);
  params.beta_high = 2.0 * eps / (alpha * ell);
  params.beta_in_window = beta >= params.beta_low && beta <= params.beta_high;
  return params;
}

Lemma1Trace lemma1_trace(const std::vector<RoundRecord>& rounds, double alpha, double eps,
                         double ell) {
  if (!(alpha > 0.0 && ell >= 1.0 && eps >= 0.0))
    throw ValidationError("lemma1_trace: invalid (alpha, eps, ell)");
  Lemma1Trace trace;
  trace.alpha = alpha;
  trace.eps = eps;
  trace.ell = ell;
  trace.required_ratio = 1.0 + eps / (alpha * ell);

  for (std::size_t t = 0; t < rounds.size(); ++t) {
    if (!rounds[t].has_oracle_fields)
      throw MissingOracleError("lemma1_trace: round records lack oracle-backed fields");
    if (t == 0) continue;
    Lemma1Round entry;
    entry.round = rounds[t].round;
    const RoundRecord& prev = rounds[t - 1];
    const RoundRecord& cur = rounds[t];
    // The one-round bound applies to pure levels with 3 eps <= e < 1/2;
    // rounds outside that window (including a saturated e = 0) are exempt.
    entry.applicable = prev.has_pure_level && cur.has_pure_level &&
                       prev.min_pure_level >= 3.0 * eps && prev.min_pure_level < 0.5;
    if (entry.applicable) {
      entry.level_prev = prev.min_pure_level;
      entry.level_new = cur.min_pure_level;
      entry.growth_ratio = (0.5 - cur.min_pure_level) / (0.5 - prev.min_pure_level);
      entry.bound_met = entry.growth_ratio >= trace.required_ratio - 1e-12;
      ++trace.rounds_applicable;
      if (entry.bound_met) ++trace.rounds_met;
    }
    trace.rounds.push_back(entry);
  }
  return trace;
}

}  // namespace plc
