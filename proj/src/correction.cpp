#include "plc/correction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "plc/errors.hpp"
#include "plc/rng.hpp"
#include "plc/theory.hpp"

namespace plc {

void CorrectionSchedule::validate() const {
  if (total_rounds < 0) throw ValidationError("schedule: total rounds must be >= 0");
  if (warmup_rounds < 0 || warmup_rounds > total_rounds)
    throw ValidationError("schedule: warm-up must lie in [0, total rounds]");
  if (!(beta > 0.0)) throw ValidationError("schedule: beta must be positive");
  if (mode == CorrectionMode::Binary) {
    if (!(initial_threshold > 0.0 && initial_threshold < 0.5))
      throw ValidationError("schedule: T0 must lie in (0, 1/2)");
    if (!(end_threshold > initial_threshold && end_threshold < 0.5))
      throw ValidationError("schedule: T_end must lie in (T0, 1/2)");
  } else {
    if (!(initial_ratio > 0.0 && initial_ratio < 1.0))
      throw ValidationError("schedule: r0 must lie in (0, 1)");
    if (!(end_ratio > initial_ratio && end_ratio <= 1.0))
      throw ValidationError("schedule: r_end must lie in (r0, 1]");
  }
}

PlcState PlcState::initial(const CorrectionSchedule& schedule) {
  PlcState state;
  state.T = schedule.initial_threshold;
  state.theta = 0.5 - schedule.initial_threshold;
  state.ratio = schedule.initial_ratio;
  state.active_ratio = schedule.initial_ratio;
  return state;
}

std::int64_t correct_once_binary(std::span<const double> class1_probs, std::vector<int>& labels,
                                 double theta) {
  if (class1_probs.size() != labels.size())
    throw ValidationError("correct_once_binary: length mismatch");
  if (!(theta >= 0.0 && theta <= 0.5))
    throw ValidationError("correct_once_binary: theta must lie in [0, 1/2]");
  std::int64_t flipped = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = class1_probs[i];
    if (std::abs(p - 0.5) >= theta) {
      const int corrected = p >= 0.5 ? 1 : 0;
      if (corrected != labels[i]) {
        labels[i] = corrected;
        ++flipped;
      }
    }
  }
  return flipped;
}

std::int64_t correct_once_multiclass(const Matrix& probs, std::vector<int>& labels, double ratio) {
  if (probs.rows != static_cast<std::int64_t>(labels.size()))
    throw ValidationError("correct_once_multiclass: length mismatch");
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw ValidationError("correct_once_multiclass: ratio must lie in (0, 1]");
  const int C = static_cast<int>(probs.cols);
  std::int64_t flipped = 0;
  for (std::int64_t i = 0; i < probs.rows; ++i) {
    const double* row = probs.row(i);
    const int current = labels[static_cast<std::size_t>(i)];
    if (current < 0 || current >= C)
      throw ValidationError("correct_once_multiclass: label outside [0, C)");
    const int h = argmax_label(row, C);
    const double f_label = std::max(row[current], 1e-12);
    const double f_top = std::max(row[h], 1e-12);
    if (f_label >= f_top) continue;  // agreement or exact tie
    if (f_label <= ratio * f_top) {
      labels[static_cast<std::size_t>(i)] = h;
      ++flipped;
    }
  }
  return flipped;
}

PlcState schedule_step(PlcState state, std::int64_t flipped, const CorrectionSchedule& schedule) {
  state.round += 1;
  state.flips_last_round = flipped;
  state.total_flips += flipped;
  if (state.round >= schedule.warmup_rounds) {
    if (schedule.mode == CorrectionMode::Binary) {
      if (flipped == 0) state.T = std::min(state.T * (1.0 + schedule.beta), schedule.end_threshold);
      state.theta = 0.5 - state.T;
    } else {
      if (flipped == 0)
        state.ratio = std::min(state.ratio * (1.0 + schedule.beta), schedule.end_ratio);
      state.active_ratio = state.ratio;
    }
  }
  return state;
}

namespace {

/// Per-round metric context shared by run_plc and run_standard.
struct MetricContext {
  const PosteriorOracle* oracle;
  const WorkingDataset* test;
  std::vector<double> train_margins;  // oracle margins of the training features

  MetricContext(const WorkingDataset& train, const PosteriorOracle* oracle_in,
                const WorkingDataset* test_in)
      : oracle(oracle_in), test(test_in) {
    if (oracle != nullptr && oracle->num_classes() == 2) {
      train_margins = oracle->margins(train.features);
    }
  }

  void fill(RoundRecord& record, const WorkingDataset& train, const SoftmaxClassifier& classifier,
            const Matrix& train_probs, const std::vector<int>& labels_trained_on) const {
    // Train accuracy against the labels the model just fit, from the same
    // probabilities the correction pass saw.
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < train_probs.rows; ++i) {
      const int predicted = argmax_label(train_probs.row(i), static_cast<int>(train_probs.cols));
      if (predicted == labels_trained_on[static_cast<std::size_t>(i)]) ++hits;
    }
    record.train_accuracy = static_cast<double>(hits) / static_cast<double>(train_probs.rows);

    if (test != nullptr) {
      record.test_accuracy_bayes = classifier.accuracy(test->features, test->bayes_labels);
    }

    if (oracle == nullptr || train_margins.empty()) return;
    record.has_oracle_fields = true;
    record.purity = purity(train.working_labels, train.bayes_labels);

    double residual_sum = 0.0;
    std::int64_t residual_count = 0;
    std::vector<int> predicted(static_cast<std::size_t>(train_probs.rows));
    for (std::int64_t i = 0; i < train_probs.rows; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      predicted[idx] = argmax_label(train_probs.row(i), static_cast<int>(train_probs.cols));
      if (train.working_labels[idx] != train.bayes_labels[idx]) {
        residual_sum += train_margins[idx];
        ++residual_count;
      }
    }
    record.residual_margin =
        residual_count > 0 ? residual_sum / static_cast<double>(residual_count) : 0.0;

    const PureLevelResult pure = min_pure_level(predicted, train_margins, train.bayes_labels);
    record.has_pure_level = pure.exists;
    record.min_pure_level = pure.level;
  }
};

}  // namespace

PlcRunResult run_plc(WorkingDataset& train, SoftmaxClassifier& classifier,
                     const CorrectionSchedule& schedule, const TrainConfig& train_config,
                     const PosteriorOracle* oracle, const WorkingDataset* test,
                     std::uint64_t seed, const RoundObserver& observer) {
  schedule.validate();
  train.validate();
  if (schedule.mode == CorrectionMode::Binary && classifier.arch().output != 2)
    throw ValidationError("run_plc: binary mode requires a 2-class classifier");

  MetricContext metrics(train, oracle, test);
  PlcRunResult result;
  PlcState state = PlcState::initial(schedule);
  std::vector<int> labels_before;

  for (int t = 1; t <= schedule.total_rounds; ++t) {
    classifier.train(train.features, train.working_labels, 1,
                     rng::derive(seed, static_cast<std::uint64_t>(t)), train_config);
    const Matrix probs = classifier.predict_proba(train.features);
    labels_before = train.working_labels;

    const bool correct = schedule.correct_during_warmup || t > schedule.warmup_rounds;
    std::int64_t flipped = 0;
    if (correct) {
      if (schedule.mode == CorrectionMode::Binary) {
        std::vector<double> class1(static_cast<std::size_t>(probs.rows));
        for (std::int64_t i = 0; i < probs.rows; ++i) class1[static_cast<std::size_t>(i)] = probs(i, 1);
        flipped = correct_once_binary(class1, train.working_labels, state.theta);
      } else {
        flipped = correct_once_multiclass(probs, train.working_labels, state.active_ratio);
      }
    }

    const PlcState state_before = state;
    state = schedule_step(state, flipped, schedule);

    RoundRecord record;
    record.round = t;
    if (schedule.mode == CorrectionMode::Binary) {
      record.theta = state_before.theta;
      record.T = state_before.T;
    } else {
      record.theta = -std::log(state_before.active_ratio);
      record.T = state_before.active_ratio;
    }
    record.flips = flipped;
    metrics.fill(record, train, classifier, probs, labels_before);
    result.rounds.push_back(record);
    result.total_flips += flipped;

    if (observer) {
      observer(RoundView{t, schedule, state_before, state, probs, labels_before,
                         train.working_labels, correct});
    }
  }
  return result;
}

PlcRunResult run_standard(WorkingDataset& train, SoftmaxClassifier& classifier, int total_rounds,
                          const TrainConfig& train_config, const PosteriorOracle* oracle,
                          const WorkingDataset* test, std::uint64_t seed) {
  train.validate();
  if (total_rounds < 0) throw ValidationError("run_standard: total rounds must be >= 0");

  MetricContext metrics(train, oracle, test);
  PlcRunResult result;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (int t = 1; t <= total_rounds; ++t) {
    classifier.train(train.features, train.working_labels, 1,
                     rng::derive(seed, static_cast<std::uint64_t>(t)), train_config);
    const Matrix probs = classifier.predict_proba(train.features);

    RoundRecord record;
    record.round = t;
    record.theta = nan;
    record.T = nan;
    record.flips = 0;
    metrics.fill(record, train, classifier, probs, train.working_labels);
    result.rounds.push_back(record);
  }
  return result;
}

}  // namespace plc
