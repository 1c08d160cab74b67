#include "plc/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "plc/parallel.hpp"
#include "plc/rng.hpp"

namespace plc {

double pmd_gap_tau(PmdType type, double gap) {
  if (!(gap >= 0.0 && gap <= 1.0))
    throw ValidationError("pmd_gap_tau: gap must lie in [0, 1]");
  switch (type) {
    case PmdType::TypeI:
      return -0.5 * gap * gap + 0.5;
    case PmdType::TypeII:
      return 1.0 - gap * gap * gap;
    case PmdType::TypeIII:
      return 1.0 - (gap * gap * gap + gap * gap + gap) / 3.0;
  }
  throw ValidationError("pmd_gap_tau: unknown noise type");
}

namespace {

/// Per-instance raw flip probabilities tau(gap_i) for the whole dataset.
std::vector<double> raw_taus(const PosteriorOracle& oracle, const Matrix& features,
                             PmdType type) {
  const int C = oracle.num_classes();
  std::vector<double> taus(static_cast<std::size_t>(features.rows));
  par::for_each_index(features.rows, [&](std::int64_t i) {
    std::vector<double> p(static_cast<std::size_t>(C));
    oracle.posterior(features.row(i), p.data());
    const auto [u, s] = top_two(p.data(), C);
    taus[static_cast<std::size_t>(i)] = pmd_gap_tau(type, p[u] - p[s]);
  });
  return taus;
}

double clipped_mean(const std::vector<double>& taus, double multiplier) {
  const auto n = static_cast<std::int64_t>(taus.size());
  return par::sum_indexed(n, [&](std::int64_t i) {
           return std::min(1.0, multiplier * taus[static_cast<std::size_t>(i)]);
         }) /
         static_cast<double>(n);
}

}  // namespace

PmdNoiseSpec calibrate_noise_level(const PosteriorOracle& oracle, const WorkingDataset& dataset,
                                   PmdType type, double target_level) {
  if (dataset.size() == 0) throw ValidationError("calibrate_noise_level: dataset is empty");
  if (!(target_level >= 0.0 && target_level <= 0.95))
    throw ValidationError("calibrate_noise_level: target must lie in [0, 0.95]");

  PmdNoiseSpec spec{type, 0.0, true};
  if (target_level == 0.0) return spec;

  const std::vector<double> taus = raw_taus(oracle, dataset.features, type);
  const auto n = static_cast<std::int64_t>(taus.size());

  // As the multiplier grows the clipped mean approaches the fraction of
  // strictly positive taus; beyond that the target is unreachable.
  const double attainable =
      static_cast<double>(par::count_indexed(n, [&](std::int64_t i) {
        return taus[static_cast<std::size_t>(i)] > 0.0;
      })) /
      static_cast<double>(n);
  if (target_level > attainable - 1e-12)
    throw InfeasibleTargetError(target_level, attainable);

  double lo = 0.0, hi = 1.0;
  while (clipped_mean(taus, hi) < target_level) {
    hi *= 2.0;
    if (hi > 1e12) throw InfeasibleTargetError(target_level, clipped_mean(taus, hi));
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (clipped_mean(taus, mid) < target_level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  spec.multiplier = 0.5 * (lo + hi);
  if (std::abs(clipped_mean(taus, spec.multiplier) - target_level) > 1e-4)
    throw InfeasibleTargetError(target_level, clipped_mean(taus, spec.multiplier));
  return spec;
}

std::pair<WorkingDataset, NoiseReport> corrupt_feature_dependent(const PosteriorOracle& oracle,
                                                                 const WorkingDataset& dataset,
                                                                 const PmdNoiseSpec& spec,
                                                                 std::uint64_t seed) {
  const int C = oracle.num_classes();
  if (C < 2) throw ValidationError("corrupt_feature_dependent: needs at least 2 classes");
  if (dataset.features.cols != oracle.dimension())
    throw ValidationError("corrupt_feature_dependent: feature dimension mismatch");

  WorkingDataset out = dataset;
  const std::int64_t n = dataset.size();
  std::vector<std::uint8_t> flipped(static_cast<std::size_t>(n), 0);

  par::for_each_index(n, [&](std::int64_t i) {
    std::vector<double> p(static_cast<std::size_t>(C));
    oracle.posterior(dataset.features.row(i), p.data());
    const auto [u, s] = top_two(p.data(), C);
    double prob = spec.multiplier * pmd_gap_tau(spec.type, p[u] - p[s]);
    if (spec.clip) prob = std::clamp(prob, 0.0, 1.0);
    auto gen = rng::at(seed, static_cast<std::uint64_t>(i));
    const bool flip = gen.next_double() < prob;
    // The noise process treats the top class u_x as the clean label and
    // either keeps it or moves it to the runner-up s_x.
    out.noisy_labels[static_cast<std::size_t>(i)] = flip ? s : u;
    flipped[static_cast<std::size_t>(i)] = flip ? 1 : 0;
  });
  out.working_labels = out.noisy_labels;

  NoiseReport report;
  report.per_class_flips.assign(static_cast<std::size_t>(C), 0);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (flipped[idx]) {
      ++report.flip_count;
      ++report.per_class_flips[static_cast<std::size_t>(dataset.bayes_labels[idx])];
    }
    if (out.noisy_labels[idx] != dataset.clean_labels[idx]) report.clean_disagreement += 1.0;
    if (dataset.clean_labels[idx] != dataset.bayes_labels[idx]) ++report.clean_label_mismatch;
  }
  report.realized_level = static_cast<double>(report.flip_count) / static_cast<double>(n);
  report.clean_disagreement /= static_cast<double>(n);
  return {std::move(out), std::move(report)};
}

void TransitionMatrix::validate() const {
  const std::int64_t C = entries.rows;
  if (C < 2 || entries.cols != C) throw ValidationError("transition matrix must be C x C, C >= 2");
  for (std::int64_t i = 0; i < C; ++i) {
    double row_sum = 0.0;
    for (std::int64_t j = 0; j < C; ++j) {
      const double v = entries(i, j);
      if (v < 0.0 || v > 1.0) throw ValidationError("transition entries must lie in [0, 1]");
      row_sum += v;
    }
    if (std::abs(row_sum - 1.0) > 1e-12)
      throw ValidationError("transition rows must sum to 1 within 1e-12");
  }
}

TransitionMatrix uniform_transition(int num_classes, double level) {
  if (num_classes < 2) throw ValidationError("uniform_transition: C must be >= 2");
  if (!(level >= 0.0 && level < 1.0))
    throw ValidationError("uniform_transition: level must lie in [0, 1)");
  TransitionMatrix tm;
  tm.kind = TransitionMatrix::Kind::Uniform;
  tm.level = level;
  tm.entries = Matrix(num_classes, num_classes, level / (num_classes - 1));
  for (int i = 0; i < num_classes; ++i) tm.entries(i, i) = 1.0 - level;
  tm.validate();
  return tm;
}

std::vector<int> cyclic_mapping(int num_classes) {
  std::vector<int> mapping(static_cast<std::size_t>(num_classes));
  for (int i = 0; i < num_classes; ++i) mapping[static_cast<std::size_t>(i)] = (i + 1) % num_classes;
  return mapping;
}

TransitionMatrix asymmetric_transition(int num_classes, double level,
                                       const std::vector<int>& mapping) {
  if (num_classes < 2) throw ValidationError("asymmetric_transition: C must be >= 2");
  if (!(level >= 0.0 && level < 1.0))
    throw ValidationError("asymmetric_transition: level must lie in [0, 1)");
  if (static_cast<int>(mapping.size()) != num_classes)
    throw ValidationError("asymmetric_transition: mapping must have C entries");
  for (int i = 0; i < num_classes; ++i) {
    const int j = mapping[static_cast<std::size_t>(i)];
    if (j < 0 || j >= num_classes) throw ValidationError("asymmetric mapping target outside [0, C)");
    if (j == i) throw ValidationError("asymmetric mapping must have no fixed points");
  }
  TransitionMatrix tm;
  tm.kind = TransitionMatrix::Kind::Asymmetric;
  tm.level = level;
  tm.mapping = mapping;
  tm.entries = Matrix(num_classes, num_classes, 0.0);
  for (int i = 0; i < num_classes; ++i) {
    tm.entries(i, i) = 1.0 - level;
    tm.entries(i, mapping[static_cast<std::size_t>(i)]) = level;
  }
  tm.validate();
  return tm;
}

std::pair<WorkingDataset, NoiseReport> apply_transition(const WorkingDataset& dataset,
                                                        const TransitionMatrix& matrix,
                                                        std::uint64_t seed) {
  matrix.validate();
  const int C = static_cast<int>(matrix.entries.rows);
  if (dataset.num_classes > C)
    throw ValidationError("apply_transition: dataset has more classes than the matrix");

  WorkingDataset out = dataset;
  const std::int64_t n = dataset.size();
  par::for_each_index(n, [&](std::int64_t i) {
    const int cur = dataset.working_labels[static_cast<std::size_t>(i)];
    auto gen = rng::at(seed, static_cast<std::uint64_t>(i));
    const int next = gen.next_categorical(
        std::span<const double>(matrix.entries.row(cur), static_cast<std::size_t>(C)));
    out.noisy_labels[static_cast<std::size_t>(i)] = next;
  });
  out.working_labels = out.noisy_labels;

  NoiseReport report;
  report.target_level = matrix.level;
  report.per_class_flips.assign(static_cast<std::size_t>(C), 0);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (out.noisy_labels[idx] != dataset.working_labels[idx]) {
      ++report.flip_count;
      ++report.per_class_flips[static_cast<std::size_t>(dataset.working_labels[idx])];
    }
    if (out.noisy_labels[idx] != dataset.clean_labels[idx]) report.clean_disagreement += 1.0;
    if (dataset.clean_labels[idx] != dataset.bayes_labels[idx]) ++report.clean_label_mismatch;
  }
  report.realized_level = static_cast<double>(report.flip_count) / static_cast<double>(n);
  report.clean_disagreement /= static_cast<double>(n);
  return {std::move(out), std::move(report)};
}

namespace {

/// Flip probability and bound base for one point; returns false when the
/// point sits inside the exempt band |eta - 1/2| < t0.
bool pmd_point(const PmdNoiseSpec& spec, const PosteriorOracle& oracle, const double* x,
               double t0, double* prob, double* bound_base) {
  double p[2];
  oracle.posterior(x, p);
  const double eta1 = p[1];
  if (std::abs(eta1 - 0.5) < t0) return false;
  const double gap = std::abs(eta1 - (1.0 - eta1));
  double prob_raw = spec.multiplier * pmd_gap_tau(spec.type, gap);
  if (spec.clip) prob_raw = std::clamp(prob_raw, 0.0, 1.0);
  *prob = prob_raw;
  // tau_{1,0} is bounded by c1 (1-eta)^{1+c2} on the eta >= 1/2 + t0 side and
  // tau_{0,1} by c1 eta^{1+c2} on the other side.
  *bound_base = eta1 >= 0.5 ? 1.0 - eta1 : eta1;
  return true;
}

}  // namespace

PmdCheckReport verify_pmd(const PmdNoiseSpec& spec, const PosteriorOracle& oracle, double t0,
                          double c1, double c2, const Matrix& sample_points) {
  if (oracle.num_classes() != 2)
    throw UnsupportedError("verify_pmd is defined for binary oracles only");
  if (!(t0 > 0.0 && t0 < 0.5)) throw ValidationError("verify_pmd: t0 must lie in (0, 1/2)");

  PmdCheckReport report;
  report.t0 = t0;
  report.c1 = c1;
  report.c2 = c2;
  report.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < sample_points.rows; ++i) {
    double prob = 0.0, base = 0.0;
    if (!pmd_point(spec, oracle, sample_points.row(i), t0, &prob, &base)) {
      ++report.points_exempt;
      continue;
    }
    ++report.points_checked;
    const double bound = c1 * std::pow(base, 1.0 + c2);
    const double margin = prob - bound;
    report.worst_margin = std::max(report.worst_margin, margin);
    if (margin > 0.0) ++report.violation_count;
  }
  if (report.points_checked == 0) report.worst_margin = 0.0;
  return report;
}

double min_c1_for_pmd(const PmdNoiseSpec& spec, const PosteriorOracle& oracle, double t0,
                      double c2, const Matrix& sample_points) {
  if (oracle.num_classes() != 2)
    throw UnsupportedError("min_c1_for_pmd is defined for binary oracles only");
  double c1 = 0.0;
  for (std::int64_t i = 0; i < sample_points.rows; ++i) {
    double prob = 0.0, base = 0.0;
    if (!pmd_point(spec, oracle, sample_points.row(i), t0, &prob, &base)) continue;
    if (prob <= 0.0) continue;
    c1 = std::max(c1, prob / std::pow(base, 1.0 + c2));
  }
  return c1;
}

}  // namespace plc
