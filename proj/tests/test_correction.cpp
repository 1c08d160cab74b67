#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "plc/correction.hpp"
#include "plc/datagen.hpp"
#include "plc/noise.hpp"
#include "plc/rng.hpp"
#include "plc/theory.hpp"

using namespace plc;

namespace {

CorrectionSchedule default_binary_schedule() {
  CorrectionSchedule s;
  s.mode = CorrectionMode::Binary;
  return s;
}

/// Blob corrupted with calibrated Type-I noise, ready for a correction run.
struct CorruptedBlob {
  WorkingDataset train;
  WorkingDataset test;
  PosteriorOracle oracle;
  NoiseReport noise;

  CorruptedBlob(std::int64_t n, double level, std::uint64_t seed)
      : CorruptedBlob(make_gaussian_mixture(default_blob_spec(), n, n / 4 + 1, seed), level,
                      seed) {}

 private:
  CorruptedBlob(std::tuple<WorkingDataset, WorkingDataset, PosteriorOracle>&& t, double level,
                std::uint64_t seed)
      : train(std::move(std::get<0>(t))),
        test(std::move(std::get<1>(t))),
        oracle(std::move(std::get<2>(t))) {
    const PmdNoiseSpec spec = calibrate_noise_level(oracle, train, PmdType::TypeI, level);
    auto [corrupted, report] = corrupt_feature_dependent(oracle, train, spec, seed + 1);
    train = std::move(corrupted);
    noise = std::move(report);
  }
};

}  // namespace

TEST_CASE("binary correction pass") {
  SUBCASE("no point is confident enough") {
    std::vector<int> labels{0, 1, 0};
    const std::vector<double> probs{0.55, 0.45, 0.6};
    CHECK(correct_once_binary(probs, labels, 0.2) == 0);
    CHECK(labels == std::vector<int>{0, 1, 0});
  }

  SUBCASE("theta 0 sets every label to the prediction") {
    std::vector<int> labels{0, 1, 0, 1};
    const std::vector<double> probs{0.9, 0.9, 0.1, 0.1};
    CHECK(correct_once_binary(probs, labels, 0.0) == 2);
    CHECK(labels == std::vector<int>{1, 1, 0, 0});
  }

  SUBCASE("hand-simulated mixed case") {
    std::vector<int> labels{0, 0, 1};
    const std::vector<double> probs{0.99, 0.45, 0.02};
    CHECK(correct_once_binary(probs, labels, 0.4) == 2);
    CHECK(labels == std::vector<int>{1, 0, 0});
  }

  SUBCASE("threshold comparison is non-strict") {
    std::vector<int> labels{0};
    const std::vector<double> probs{0.9};
    CHECK(correct_once_binary(probs, labels, 0.4) == 1);  // |0.9 - 0.5| == theta
    CHECK(labels[0] == 1);
  }

  SUBCASE("idempotent at fixed inputs") {
    rng::Stream gen(3);
    std::vector<double> probs(500);
    std::vector<int> labels(500);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      probs[i] = gen.next_double();
      labels[i] = static_cast<int>(gen.next_below(2));
    }
    correct_once_binary(probs, labels, 0.25);
    const std::vector<int> once = labels;
    CHECK(correct_once_binary(probs, labels, 0.25) == 0);
    CHECK(labels == once);
  }
}

TEST_CASE("multiclass correction pass") {
  Matrix probs(1, 3);

  SUBCASE("agreement never flips") {
    probs(0, 0) = 0.7;
    probs(0, 1) = 0.2;
    probs(0, 2) = 0.1;
    std::vector<int> labels{0};
    CHECK(correct_once_multiclass(probs, labels, 1.0) == 0);
    CHECK(labels[0] == 0);
  }

  SUBCASE("ratio 1 flips every strict disagreement") {
    Matrix many(3, 3);
    const double rows[3][3] = {{0.5, 0.3, 0.2}, {0.1, 0.6, 0.3}, {0.3, 0.3, 0.4}};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) many(i, j) = rows[i][j];
    }
    std::vector<int> labels{1, 1, 0};
    CHECK(correct_once_multiclass(many, labels, 1.0) == 2);
    CHECK(labels == std::vector<int>{0, 1, 2});
  }

  SUBCASE("ratio rule from direct arithmetic") {
    probs(0, 0) = 0.70;
    probs(0, 1) = 0.20;
    probs(0, 2) = 0.10;
    std::vector<int> labels{1};
    CHECK(correct_once_multiclass(probs, labels, 0.3) == 1);  // 0.2/0.7 = 0.2857 <= 0.3
    CHECK(labels[0] == 0);

    labels = {1};
    CHECK(correct_once_multiclass(probs, labels, 0.25) == 0);  // 0.2857 > 0.25
    CHECK(labels[0] == 1);
  }

  SUBCASE("exact ties never flip") {
    probs(0, 0) = 0.4;
    probs(0, 1) = 0.4;
    probs(0, 2) = 0.2;
    std::vector<int> labels{1};
    CHECK(correct_once_multiclass(probs, labels, 1.0) == 0);
    CHECK(labels[0] == 1);
  }

  SUBCASE("zero probabilities are floored before the log-ratio") {
    probs(0, 0) = 1.0;
    probs(0, 1) = 0.0;
    probs(0, 2) = 0.0;
    std::vector<int> labels{2};
    CHECK(correct_once_multiclass(probs, labels, 0.5) == 1);
    CHECK(labels[0] == 0);
  }

  SUBCASE("idempotent at fixed inputs") {
    Matrix many(200, 3);
    rng::Stream gen(9);
    std::vector<int> labels(200);
    for (std::int64_t i = 0; i < 200; ++i) {
      double sum = 0.0;
      for (int c = 0; c < 3; ++c) {
        many(i, c) = gen.next_double() + 1e-3;
        sum += many(i, c);
      }
      for (int c = 0; c < 3; ++c) many(i, c) /= sum;
      labels[static_cast<std::size_t>(i)] = static_cast<int>(gen.next_below(3));
    }
    correct_once_multiclass(many, labels, 0.5);
    const std::vector<int> once = labels;
    CHECK(correct_once_multiclass(many, labels, 0.5) == 0);
    CHECK(labels == once);
  }
}

TEST_CASE("schedule evolution") {
  CorrectionSchedule schedule = default_binary_schedule();
  schedule.warmup_rounds = 5;
  schedule.total_rounds = 40;

  SUBCASE("warm-up freezes everything except the round counter") {
    PlcState state = PlcState::initial(schedule);
    state = schedule_step(state, 0, schedule);
    CHECK(state.round == 1);
    CHECK(state.T == schedule.initial_threshold);
    CHECK(state.theta == 0.5 - schedule.initial_threshold);
  }

  SUBCASE("T is capped at T_end") {
    PlcState state = PlcState::initial(schedule);
    state.round = 10;
    state.T = schedule.end_threshold;
    state.theta = 0.5 - state.T;
    state = schedule_step(state, 0, schedule);
    CHECK(state.T == schedule.end_threshold);
  }

  SUBCASE("three zero-flip rounds after warm-up compound the growth") {
    PlcState state = PlcState::initial(schedule);
    state.round = schedule.warmup_rounds;  // past warm-up
    for (int i = 0; i < 3; ++i) state = schedule_step(state, 0, schedule);
    CHECK(state.T == doctest::Approx(0.1331).epsilon(1e-12));
    CHECK(state.theta == doctest::Approx(0.3669).epsilon(1e-12));
  }

  SUBCASE("flips hold the threshold in place") {
    PlcState state = PlcState::initial(schedule);
    state.round = schedule.warmup_rounds;
    state = schedule_step(state, 17, schedule);
    CHECK(state.T == schedule.initial_threshold);
    CHECK(state.flips_last_round == 17);
    CHECK(state.total_flips == 17);
  }

  SUBCASE("multiclass ratio follows the same rule") {
    CorrectionSchedule mc = schedule;
    mc.mode = CorrectionMode::Multiclass;
    PlcState state = PlcState::initial(mc);
    state.round = mc.warmup_rounds;
    for (int i = 0; i < 3; ++i) state = schedule_step(state, 0, mc);
    CHECK(state.ratio == doctest::Approx(0.3 * 1.1 * 1.1 * 1.1).epsilon(1e-12));
    CHECK(state.active_ratio == state.ratio);
  }

  SUBCASE("schedule validation") {
    CorrectionSchedule bad = default_binary_schedule();
    bad.initial_threshold = 0.5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = default_binary_schedule();
    bad.end_threshold = 0.05;  // below T0
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = default_binary_schedule();
    bad.warmup_rounds = 200;  // m > N
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    CorrectionSchedule mc = default_binary_schedule();
    mc.mode = CorrectionMode::Multiclass;
    mc.initial_ratio = 1.2;
    CHECK_THROWS_AS(mc.validate(), ValidationError);
  }
}

TEST_CASE("oracle-as-classifier makes the confident region exactly pure") {
  CorruptedBlob fix(4000, 0.35, 5);
  const Matrix posteriors = fix.oracle.posterior_batch(fix.train.features);
  std::vector<double> eta1(static_cast<std::size_t>(posteriors.rows));
  for (std::int64_t i = 0; i < posteriors.rows; ++i) eta1[static_cast<std::size_t>(i)] = posteriors(i, 1);

  const double theta = 0.1;
  std::vector<int> labels = fix.train.working_labels;
  correct_once_binary(eta1, labels, theta);

  for (std::int64_t i = 0; i < fix.train.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (std::abs(eta1[idx] - 0.5) >= theta) {
      CHECK(labels[idx] == fix.train.bayes_labels[idx]);
    } else {
      CHECK(labels[idx] == fix.train.working_labels[idx]);
    }
  }
}

TEST_CASE("run_plc on a no-op schedule returns the noisy labels") {
  CorruptedBlob fix(800, 0.35, 7);
  CorrectionSchedule schedule = default_binary_schedule();
  schedule.total_rounds = 10;
  schedule.warmup_rounds = 10;
  schedule.correct_during_warmup = false;

  SoftmaxClassifier classifier({2, {8}, 2, Activation::Relu}, 3);
  WorkingDataset train = fix.train;
  const PlcRunResult result =
      run_plc(train, classifier, schedule, {0.01, 64}, &fix.oracle, &fix.test, 1);

  CHECK(result.total_flips == 0);
  CHECK(train.working_labels == fix.train.noisy_labels);
  CHECK(result.rounds.size() == 10);
  for (const RoundRecord& record : result.rounds) CHECK(record.flips == 0);
}

TEST_CASE("run_plc records oracle metrics and respects schedule invariants") {
  CorruptedBlob fix(2000, 0.35, 11);
  CorrectionSchedule schedule = default_binary_schedule();
  schedule.total_rounds = 30;
  schedule.warmup_rounds = 5;

  SoftmaxClassifier classifier({2, {16, 16}, 2, Activation::Relu}, 21);
  WorkingDataset train = fix.train;

  std::int64_t observer_rounds = 0;
  const RoundObserver observer = [&](const RoundView& view) {
    ++observer_rounds;
    CHECK(view.labels_before.size() == view.labels_after.size());
    // Every changed label meets the threshold condition at the probabilities
    // the correction saw, and equals the classifier's prediction.
    for (std::size_t i = 0; i < view.labels_before.size(); ++i) {
      if (view.labels_before[i] != view.labels_after[i]) {
        const double p1 = view.class_probs(static_cast<std::int64_t>(i), 1);
        CHECK(std::abs(p1 - 0.5) >= view.state_before.theta);
        CHECK(view.labels_after[i] == (p1 >= 0.5 ? 1 : 0));
      }
    }
  };

  const PlcRunResult result =
      run_plc(train, classifier, schedule, {0.01, 128}, &fix.oracle, &fix.test, 31, observer);

  CHECK(observer_rounds == 30);
  REQUIRE(result.rounds.size() == 30);
  double prev_theta = 1.0;
  double prev_T = 0.0;
  for (const RoundRecord& record : result.rounds) {
    CHECK(record.has_oracle_fields);
    CHECK(record.theta <= prev_theta);
    CHECK(record.T >= prev_T);
    CHECK(record.T <= schedule.end_threshold);
    CHECK(record.purity >= 0.0);
    CHECK(record.purity <= 1.0);
    prev_theta = record.theta;
    prev_T = record.T;
  }
}

TEST_CASE("full runs are bit-reproducible") {
  auto run_once = [](std::uint64_t seed) {
    CorruptedBlob fix(1000, 0.35, 13);
    CorrectionSchedule schedule = default_binary_schedule();
    schedule.total_rounds = 12;
    schedule.warmup_rounds = 3;
    SoftmaxClassifier classifier({2, {16}, 2, Activation::Relu}, 5);
    WorkingDataset train = fix.train;
    PlcRunResult result =
        run_plc(train, classifier, schedule, {0.01, 128}, &fix.oracle, &fix.test, seed);
    return std::make_pair(std::move(result), train.working_labels);
  };

  const auto [ra, labels_a] = run_once(77);
  const auto [rb, labels_b] = run_once(77);
  const auto [rc, labels_c] = run_once(78);

  CHECK(labels_a == labels_b);
  REQUIRE(ra.rounds.size() == rb.rounds.size());
  for (std::size_t t = 0; t < ra.rounds.size(); ++t) {
    CHECK(ra.rounds[t].purity == rb.rounds[t].purity);
    CHECK(ra.rounds[t].flips == rb.rounds[t].flips);
    CHECK(ra.rounds[t].test_accuracy_bayes == rb.rounds[t].test_accuracy_bayes);
    CHECK(ra.rounds[t].min_pure_level == rb.rounds[t].min_pure_level);
  }

  // A different seed shuffles batches differently, so the training path (and
  // with it the recorded metrics) must diverge even if the final corrected
  // labels coincide.
  bool any_difference = labels_a != labels_c;
  for (std::size_t t = 0; t < ra.rounds.size() && !any_difference; ++t) {
    any_difference = ra.rounds[t].train_accuracy != rc.rounds[t].train_accuracy ||
                     ra.rounds[t].test_accuracy_bayes != rc.rounds[t].test_accuracy_bayes ||
                     ra.rounds[t].min_pure_level != rc.rounds[t].min_pure_level;
  }
  CHECK(any_difference);
}

TEST_CASE("run_standard trains without touching labels") {
  CorruptedBlob fix(1000, 0.35, 17);
  SoftmaxClassifier classifier({2, {16}, 2, Activation::Relu}, 5);
  WorkingDataset train = fix.train;
  const PlcRunResult result =
      run_standard(train, classifier, 8, {0.01, 128}, &fix.oracle, &fix.test, 3);

  CHECK(train.working_labels == fix.train.working_labels);
  CHECK(result.rounds.size() == 8);
  for (const RoundRecord& record : result.rounds) {
    CHECK(record.flips == 0);
    CHECK(std::isnan(record.theta));
    CHECK(record.purity == doctest::Approx(1.0 - fix.noise.realized_level));
  }
}
