#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "plc/datagen.hpp"
#include "plc/matrix.hpp"
#include "plc/model.hpp"

namespace plc {

enum class CorrectionMode { Binary, Multiclass };

/// Parameters of the progressive correction loop: confidence thresholds,
/// relaxation step, warm-up length and total round budget.
struct CorrectionSchedule {
  CorrectionMode mode = CorrectionMode::Binary;
  double initial_threshold = 0.1;  // T0
  double end_threshold = 0.45;     // T_end
  double beta = 0.1;
  int warmup_rounds = 20;  // m
  int total_rounds = 180;  // N
  double initial_ratio = 0.3;  // r0 (multiclass)
  double end_ratio = 1.0;      // r_end (multiclass)
  bool correct_during_warmup = true;

  void validate() const;
};

/// Mutable loop state. In binary mode theta = 1/2 - T; in multiclass mode the
/// active ratio plays theta's role (larger = more permissive).
struct PlcState {
  int round = 0;
  double T = 0.0;
  double theta = 0.0;
  double ratio = 0.0;
  double active_ratio = 0.0;
  std::int64_t flips_last_round = 0;
  std::int64_t total_flips = 0;

  static PlcState initial(const CorrectionSchedule& schedule);
};

/// One row of the run history.
struct RoundRecord {
  int round = 0;
  double theta = 0.0;  // multiclass: -log(active ratio)
  double T = 0.0;      // multiclass: active ratio
  std::int64_t flips = 0;
  bool has_oracle_fields = false;
  double purity = 0.0;           // working labels vs Bayes labels
  double train_accuracy = 0.0;   // classifier vs the labels it just trained on
  double test_accuracy_bayes = 0.0;
  double residual_margin = 0.0;  // mean oracle margin of still-incorrect labels
  bool has_pure_level = false;
  double min_pure_level = 0.0;   // smallest empirical pure level of the classifier
};

/// Binary correction pass: where |p_i - 1/2| >= theta the label becomes
/// I{p_i >= 1/2}. Returns the number of labels that changed.
std::int64_t correct_once_binary(std::span<const double> class1_probs, std::vector<int>& labels,
                                 double theta);

/// Multi-class correction pass: with h the row argmax, flip label to h when
/// f_label <= ratio * f_h (log-gap rule); agreement and exact ties never flip.
/// Probabilities are floored at 1e-12 before the comparison.
std::int64_t correct_once_multiclass(const Matrix& probs, std::vector<int>& labels, double ratio);

/// Advances the schedule after a round: past warm-up, a zero-flip round grows
/// T (or the ratio) by (1+beta) up to its cap, and the active threshold
/// follows the grown value.
PlcState schedule_step(PlcState state, std::int64_t flipped, const CorrectionSchedule& schedule);

/// Everything the per-round observer may inspect. `class_probs` holds the
/// classifier's probabilities used for this round's correction.
struct RoundView {
  int round;
  const CorrectionSchedule& schedule;
  const PlcState& state_before;
  const PlcState& state_after;
  const Matrix& class_probs;
  const std::vector<int>& labels_before;
  const std::vector<int>& labels_after;
  bool corrected;  // false while warm-up correction is disabled
};

using RoundObserver = std::function<void(const RoundView&)>;

struct PlcRunResult {
  std::vector<RoundRecord> rounds;
  std::int64_t total_flips = 0;
};

/// The full correction loop: per round, one epoch of continued training on the
/// working labels, a correction pass at the current threshold, then the
/// schedule update. Oracle-backed metrics (purity, margins, pure levels) are
/// recorded when `oracle` is non-null; per-round test accuracy when `test` is
/// non-null. Deterministic for a fixed seed.
PlcRunResult run_plc(WorkingDataset& train, SoftmaxClassifier& classifier,
                     const CorrectionSchedule& schedule, const TrainConfig& train_config,
                     const PosteriorOracle* oracle, const WorkingDataset* test,
                     std::uint64_t seed, const RoundObserver& observer = {});

/// Baseline: the identical training budget with correction disabled.
PlcRunResult run_standard(WorkingDataset& train, SoftmaxClassifier& classifier, int total_rounds,
                          const TrainConfig& train_config, const PosteriorOracle* oracle,
                          const WorkingDataset* test, std::uint64_t seed);

}  // namespace plc
