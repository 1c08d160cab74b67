#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "plc/datagen.hpp"
#include "plc/matrix.hpp"

namespace plc {

enum class PmdType { TypeI, TypeII, TypeIII };

/// Feature-dependent noise model: one of the three polynomial flip-probability
/// formulas scaled by a calibration multiplier, with probabilities clipped to
/// [0, 1] when `clip` is set.
struct PmdNoiseSpec {
  PmdType type = PmdType::TypeI;
  double multiplier = 1.0;
  bool clip = true;
};

/// Row-stochastic C x C label transition matrix.
struct TransitionMatrix {
  enum class Kind { Uniform, Asymmetric };

  Matrix entries;
  double level = 0.0;
  Kind kind = Kind::Uniform;
  std::vector<int> mapping;  // asymmetric only: i -> mapping[i]

  /// Throws unless every row sums to 1 within 1e-12 with entries in [0, 1].
  void validate() const;
};

/// Constants and outcome of a Definition-style PMD bound check.
struct PmdCheckReport {
  double t0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  std::int64_t points_checked = 0;
  std::int64_t points_exempt = 0;
  std::int64_t violation_count = 0;
  double worst_margin = 0.0;  // max over checked points of (flip prob - bound), <= 0 when clean
};

struct NoiseReport {
  double target_level = 0.0;
  /// Fraction of labels the corruption changed, measured against the labels
  /// the process starts from (the top-posterior class u_x for
  /// feature-dependent noise, the pre-application labels for transition
  /// noise).
  double realized_level = 0.0;
  std::int64_t flip_count = 0;
  std::vector<std::int64_t> per_class_flips;  // indexed by source class
  /// Fraction of noisy labels disagreeing with the sampled clean channel.
  double clean_disagreement = 0.0;
  /// Count of instances whose sampled clean label differs from u_x.
  std::int64_t clean_label_mismatch = 0;
  std::optional<PmdCheckReport> pmd_check;
};

/// Uncalibrated flip probability as a function of the posterior gap
/// eta_u - eta_s in [0, 1].
double pmd_gap_tau(PmdType type, double gap);

/// Finds (by bisection) the multiplier making the mean clipped flip
/// probability over the dataset match target_level within 1e-4.
PmdNoiseSpec calibrate_noise_level(const PosteriorOracle& oracle, const WorkingDataset& dataset,
                                   PmdType type, double target_level);

/// Flips each instance's label from its most confident class u_x to its
/// second-most confident class s_x with the calibrated probability.
/// Deterministic per seed.
std::pair<WorkingDataset, NoiseReport> corrupt_feature_dependent(const PosteriorOracle& oracle,
                                                                 const WorkingDataset& dataset,
                                                                 const PmdNoiseSpec& spec,
                                                                 std::uint64_t seed);

TransitionMatrix uniform_transition(int num_classes, double level);

/// `mapping` must be fixed-point free; entry i is flipped to mapping[i] with
/// probability `level`.
TransitionMatrix asymmetric_transition(int num_classes, double level,
                                       const std::vector<int>& mapping);

/// Default asymmetric class mapping: cyclic shift i -> (i+1) mod C.
std::vector<int> cyclic_mapping(int num_classes);

/// Resamples every label from the row of its current value. Composable on top
/// of feature-dependent corruption (hybrid noise).
std::pair<WorkingDataset, NoiseReport> apply_transition(const WorkingDataset& dataset,
                                                        const TransitionMatrix& matrix,
                                                        std::uint64_t seed);

/// Checks the polynomial-margin bound tau <= c1 * (distance to the wrong
/// side)^(1+c2) on every sample point in the confident region
/// |eta - 1/2| >= t0; points inside the margin band are exempt. Binary only.
PmdCheckReport verify_pmd(const PmdNoiseSpec& spec, const PosteriorOracle& oracle, double t0,
                          double c1, double c2, const Matrix& sample_points);

/// Smallest c1 with zero violations over the sample points, for a fixed c2
/// and margin t0 (the empirical fit the bound check reports).
double min_c1_for_pmd(const PmdNoiseSpec& spec, const PosteriorOracle& oracle, double t0,
                      double c2, const Matrix& sample_points);

}  // namespace plc
