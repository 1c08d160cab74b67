#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <tuple>

#include "plc/datagen.hpp"
#include "plc/noise.hpp"
#include "plc/rng.hpp"

using namespace plc;

namespace {

struct BlobFixture {
  WorkingDataset train;
  WorkingDataset test;
  PosteriorOracle oracle;

  explicit BlobFixture(std::int64_t n = 10000, std::uint64_t seed = 5)
      : BlobFixture(make_gaussian_mixture(default_blob_spec(), n, 10, seed)) {}

 private:
  explicit BlobFixture(std::tuple<WorkingDataset, WorkingDataset, PosteriorOracle>&& t)
      : train(std::move(std::get<0>(t))),
        test(std::move(std::get<1>(t))),
        oracle(std::move(std::get<2>(t))) {}
};

}  // namespace

TEST_CASE("flip probability formulas at the anchor gaps") {
  CHECK(pmd_gap_tau(PmdType::TypeI, 0.0) == doctest::Approx(0.5));
  CHECK(pmd_gap_tau(PmdType::TypeII, 0.0) == doctest::Approx(1.0));
  CHECK(pmd_gap_tau(PmdType::TypeIII, 0.0) == doctest::Approx(1.0));

  CHECK(pmd_gap_tau(PmdType::TypeI, 1.0) == doctest::Approx(0.0));
  CHECK(pmd_gap_tau(PmdType::TypeII, 1.0) == doctest::Approx(0.0));
  CHECK(pmd_gap_tau(PmdType::TypeIII, 1.0) == doctest::Approx(0.0));

  CHECK(pmd_gap_tau(PmdType::TypeI, 0.5) == doctest::Approx(0.375));
  CHECK(pmd_gap_tau(PmdType::TypeII, 0.5) == doctest::Approx(0.875));
  CHECK(pmd_gap_tau(PmdType::TypeIII, 0.5) == doctest::Approx(0.7083333333333333));

  CHECK_THROWS_AS(pmd_gap_tau(PmdType::TypeI, -0.01), ValidationError);
  CHECK_THROWS_AS(pmd_gap_tau(PmdType::TypeI, 1.01), ValidationError);
}

TEST_CASE("calibration fixed points and monotonicity") {
  BlobFixture fix;

  CHECK(calibrate_noise_level(fix.oracle, fix.train, PmdType::TypeI, 0.0).multiplier == 0.0);

  // Target equal to the uncalibrated mean -> multiplier 1.
  const Matrix posteriors = fix.oracle.posterior_batch(fix.train.features);
  double mean_tau = 0.0;
  for (std::int64_t i = 0; i < posteriors.rows; ++i) {
    const auto [u, s] = top_two(posteriors.row(i), 2);
    mean_tau += pmd_gap_tau(PmdType::TypeI, posteriors(i, u) - posteriors(i, s));
  }
  mean_tau /= static_cast<double>(posteriors.rows);
  const PmdNoiseSpec unit = calibrate_noise_level(fix.oracle, fix.train, PmdType::TypeI, mean_tau);
  CHECK(unit.multiplier == doctest::Approx(1.0).epsilon(1e-6));

  double previous = -1.0;
  for (double target : {0.05, 0.15, 0.25, 0.35, 0.5, 0.7}) {
    const double multiplier =
        calibrate_noise_level(fix.oracle, fix.train, PmdType::TypeII, target).multiplier;
    CHECK(multiplier > previous);
    previous = multiplier;
  }
}

TEST_CASE("calibration reports an infeasible target") {
  // Points ~50 sigma out have vanishing flip probability; no multiplier the
  // bisection will reach can push the clipped mean to 0.5.
  WorkingDataset far;
  far.num_classes = 2;
  far.split = "train";
  far.features = Matrix(4, 2);
  for (std::int64_t i = 0; i < 4; ++i) {
    far.features(i, 0) = i % 2 == 0 ? 50.0 : -50.0;
    far.features(i, 1) = 0.0;
  }
  far.clean_labels = {1, 0, 1, 0};
  far.bayes_labels = far.clean_labels;
  far.noisy_labels = far.clean_labels;
  far.working_labels = far.clean_labels;
  PosteriorOracle oracle(default_blob_spec());
  CHECK_THROWS_AS(calibrate_noise_level(oracle, far, PmdType::TypeII, 0.5),
                  InfeasibleTargetError);
}

TEST_CASE("feature-dependent corruption semantics") {
  BlobFixture fix(4000);

  SUBCASE("zero multiplier flips nothing") {
    const auto [corrupted, report] =
        corrupt_feature_dependent(fix.oracle, fix.train, {PmdType::TypeI, 0.0, true}, 3);
    CHECK(report.realized_level == 0.0);
    CHECK(report.flip_count == 0);
    // Unflipped labels sit at the top-posterior class; on the subset where
    // the sampled clean label is that class this is the clean label.
    CHECK(corrupted.noisy_labels == fix.train.bayes_labels);
    for (std::int64_t i = 0; i < fix.train.size(); ++i) {
      const auto idx = static_cast<std::size_t>(i);
      if (fix.train.clean_labels[idx] == fix.train.bayes_labels[idx]) {
        CHECK(corrupted.noisy_labels[idx] == fix.train.clean_labels[idx]);
      }
    }
    CHECK(report.clean_label_mismatch > 0);  // the blob is wide enough that y != u happens
  }

  SUBCASE("saturated multiplier flips everything to the runner-up") {
    const auto [corrupted, report] =
        corrupt_feature_dependent(fix.oracle, fix.train, {PmdType::TypeI, 1e9, true}, 3);
    CHECK(report.realized_level == 1.0);
    const Matrix posteriors = fix.oracle.posterior_batch(fix.train.features);
    for (std::int64_t i = 0; i < 50; ++i) {
      const auto [u, s] = top_two(posteriors.row(i), 2);
      CHECK(corrupted.noisy_labels[static_cast<std::size_t>(i)] == s);
    }
    // Agreement with the sampled clean channel drops to the y != u fraction.
    CHECK(report.clean_disagreement ==
          doctest::Approx(1.0 - static_cast<double>(report.clean_label_mismatch) /
                                    static_cast<double>(fix.train.size())));
  }

  SUBCASE("corrupted points concentrate near the decision boundary") {
    const PmdNoiseSpec spec = calibrate_noise_level(fix.oracle, fix.train, PmdType::TypeI, 0.35);
    const auto [corrupted, report] = corrupt_feature_dependent(fix.oracle, fix.train, spec, 9);
    const auto margins = fix.oracle.margins(fix.train.features);
    double flipped_margin = 0.0, kept_margin = 0.0;
    std::int64_t flipped_count = 0, kept_count = 0;
    for (std::int64_t i = 0; i < fix.train.size(); ++i) {
      const auto idx = static_cast<std::size_t>(i);
      if (corrupted.noisy_labels[idx] != fix.train.bayes_labels[idx]) {
        flipped_margin += margins[idx];
        ++flipped_count;
      } else {
        kept_margin += margins[idx];
        ++kept_count;
      }
    }
    REQUIRE(flipped_count > 0);
    REQUIRE(kept_count > 0);
    CHECK(flipped_margin / flipped_count < kept_margin / kept_count);
  }

  SUBCASE("corruption is deterministic per seed and resets working labels") {
    const PmdNoiseSpec spec = calibrate_noise_level(fix.oracle, fix.train, PmdType::TypeIII, 0.35);
    const auto [a, ra] = corrupt_feature_dependent(fix.oracle, fix.train, spec, 21);
    const auto [b, rb] = corrupt_feature_dependent(fix.oracle, fix.train, spec, 21);
    const auto [c, rc] = corrupt_feature_dependent(fix.oracle, fix.train, spec, 22);
    CHECK(a.noisy_labels == b.noisy_labels);
    CHECK(a.noisy_labels != c.noisy_labels);
    CHECK(a.working_labels == a.noisy_labels);
    CHECK(ra.realized_level == rb.realized_level);
  }
}

TEST_CASE("calibrated corruption realizes the target level across seeds") {
  BlobFixture fix;
  const PmdNoiseSpec spec = calibrate_noise_level(fix.oracle, fix.train, PmdType::TypeI, 0.35);
  double mean_realized = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const auto [corrupted, report] =
        corrupt_feature_dependent(fix.oracle, fix.train, spec, 1000 + s);
    mean_realized += report.realized_level;
  }
  mean_realized /= seeds;
  CHECK(std::abs(mean_realized - 0.35) <= 0.015);
}

TEST_CASE("transition matrix constructors") {
  const TransitionMatrix uniform = uniform_transition(10, 0.3);
  CHECK(uniform.entries(0, 0) == doctest::Approx(0.7));
  CHECK(uniform.entries(0, 1) == doctest::Approx(0.3 / 9.0));
  for (std::int64_t i = 0; i < 10; ++i) {
    double row_sum = 0.0;
    for (std::int64_t j = 0; j < 10; ++j) row_sum += uniform.entries(i, j);
    CHECK(std::abs(row_sum - 1.0) <= 1e-12);
  }

  const TransitionMatrix identity = uniform_transition(4, 0.0);
  for (std::int64_t i = 0; i < 4; ++i) {
    for (std::int64_t j = 0; j < 4; ++j) {
      CHECK(identity.entries(i, j) == (i == j ? 1.0 : 0.0));
    }
  }

  const TransitionMatrix binary = asymmetric_transition(2, 0.3, cyclic_mapping(2));
  CHECK(binary.entries(0, 0) == doctest::Approx(0.7));
  CHECK(binary.entries(0, 1) == doctest::Approx(0.3));
  CHECK(binary.entries(1, 0) == doctest::Approx(0.3));
  CHECK(binary.entries(1, 1) == doctest::Approx(0.7));

  const TransitionMatrix cyc = asymmetric_transition(10, 0.3, cyclic_mapping(10));
  for (std::int64_t i = 0; i < 10; ++i) {
    int nonzero = 0;
    for (std::int64_t j = 0; j < 10; ++j) {
      if (cyc.entries(i, j) != 0.0) {
        ++nonzero;
        CHECK((cyc.entries(i, j) == doctest::Approx(0.7) ||
               cyc.entries(i, j) == doctest::Approx(0.3)));
      }
    }
    CHECK(nonzero == 2);
  }

  CHECK_THROWS_AS(asymmetric_transition(3, 0.2, std::vector<int>{0, 2, 1}), ValidationError);
  CHECK_THROWS_AS(uniform_transition(1, 0.2), ValidationError);
  CHECK_THROWS_AS(uniform_transition(4, 1.0), ValidationError);
}

TEST_CASE("apply_transition resamples labels from matrix rows") {
  WorkingDataset ds;
  ds.num_classes = 2;
  ds.split = "train";
  ds.features = Matrix(6, 1);
  ds.clean_labels = {0, 1, 0, 1, 0, 1};
  ds.bayes_labels = ds.clean_labels;
  ds.noisy_labels = ds.clean_labels;
  ds.working_labels = ds.clean_labels;

  SUBCASE("identity matrix changes nothing") {
    const auto [out, report] = apply_transition(ds, uniform_transition(2, 0.0), 4);
    CHECK(out.working_labels == ds.working_labels);
    CHECK(report.realized_level == 0.0);
  }

  SUBCASE("deterministic permutation flips every label") {
    TransitionMatrix swap;
    swap.entries = Matrix(2, 2, 0.0);
    swap.entries(0, 1) = 1.0;
    swap.entries(1, 0) = 1.0;
    swap.level = 1.0;
    const auto [out, report] = apply_transition(ds, swap, 4);
    CHECK(report.realized_level == 1.0);
    for (std::size_t i = 0; i < out.working_labels.size(); ++i) {
      CHECK(out.working_labels[i] == 1 - ds.working_labels[i]);
    }
  }
}

TEST_CASE("uniform transition realizes its level at scale") {
  const std::int64_t n = 100000;
  WorkingDataset ds;
  ds.num_classes = 10;
  ds.split = "train";
  ds.features = Matrix(n, 1);
  ds.clean_labels.resize(static_cast<std::size_t>(n));
  rng::Stream gen(8);
  for (auto& y : ds.clean_labels) y = static_cast<int>(gen.next_below(10));
  ds.bayes_labels = ds.clean_labels;
  ds.noisy_labels = ds.clean_labels;
  ds.working_labels = ds.clean_labels;

  const auto [out, report] = apply_transition(ds, uniform_transition(10, 0.3), 5150);
  CHECK(std::abs(report.realized_level - 0.30) <= 0.01);
}

TEST_CASE("pmd bound checker") {
  BlobFixture fix(4000);
  Matrix grid(801, 2);
  for (std::int64_t i = 0; i <= 800; ++i) {
    grid(i, 0) = -4.0 + 0.01 * static_cast<double>(i);
    grid(i, 1) = 0.0;
  }

  SUBCASE("zero noise satisfies any positive bound") {
    const PmdCheckReport report =
        verify_pmd({PmdType::TypeI, 0.0, true}, fix.oracle, 0.1, 0.5, 1.0, grid);
    CHECK(report.violation_count == 0);
    CHECK(report.points_checked > 0);
    CHECK(report.points_exempt > 0);
    CHECK(report.worst_margin <= 0.0);
  }

  SUBCASE("constant noise 0.3 violates c1=1, c2=1 in the confident region") {
    // tau = 0.3 everywhere is emulated by TypeII with multiplier 0.3 at the
    // gap-0 anchor... instead check the arithmetic case directly: at
    // eta = 0.9 the bound is (1-0.9)^2 = 0.01 < 0.3.
    // A calibrated spec mimicking constant noise: multiplier chosen so the
    // clipped probability stays 0.3 wherever tau >= 0.3 is impossible with
    // one multiplier, so probe the checker with a synthetic spec whose raw
    // tau at high margins still exceeds the bound.
    const PmdNoiseSpec constant_ish{PmdType::TypeI, 0.6, true};  // prob ~0.3 at gap 0, slow decay
    const PmdCheckReport report = verify_pmd(constant_ish, fix.oracle, 0.1, 1.0, 1.0, grid);
    CHECK(report.violation_count > 0);
    CHECK(report.worst_margin > 0.0);
  }

  SUBCASE("minimal c1 has zero violations and is tight") {
    const PmdNoiseSpec spec = calibrate_noise_level(fix.oracle, fix.train, PmdType::TypeI, 0.35);
    const double c1 = min_c1_for_pmd(spec, fix.oracle, 0.15, 1.0, grid);
    CHECK(c1 > 0.0);
    const PmdCheckReport clean = verify_pmd(spec, fix.oracle, 0.15, c1, 1.0, grid);
    CHECK(clean.violation_count == 0);
    const PmdCheckReport tight = verify_pmd(spec, fix.oracle, 0.15, c1 * 0.98, 1.0, grid);
    CHECK(tight.violation_count > 0);

    // Cross-check the direct supremum against an exponential-ladder search.
    double grid_c1 = 0.01;
    while (grid_c1 < 1e6 &&
           verify_pmd(spec, fix.oracle, 0.15, grid_c1, 1.0, grid).violation_count > 0) {
      grid_c1 *= 1.05;
    }
    CHECK(grid_c1 == doctest::Approx(c1).epsilon(0.06));
  }

  SUBCASE("multi-class oracles are rejected") {
    MixtureSpec three = default_blob_spec();
    three.num_classes = 3;
    three.components.push_back({{0.0, 3.0}, {1.0, 1.0}, false, 0.0, 2});
    three.components[0].prior = 0.5;
    three.components[1].prior = 0.5;
    PosteriorOracle oracle3(three);
    CHECK_THROWS_AS(verify_pmd({PmdType::TypeI, 1.0, true}, oracle3, 0.1, 1.0, 1.0, grid),
                    UnsupportedError);
  }
}

TEST_CASE("every emitted flip probability lies in [0,1]") {
  BlobFixture fix(2000);
  for (const PmdType type : {PmdType::TypeI, PmdType::TypeII, PmdType::TypeIII}) {
    for (double target : {0.35, 0.7}) {
      const PmdNoiseSpec spec = calibrate_noise_level(fix.oracle, fix.train, type, target);
      const Matrix posteriors = fix.oracle.posterior_batch(fix.train.features);
      for (std::int64_t i = 0; i < posteriors.rows; ++i) {
        const auto [u, s] = top_two(posteriors.row(i), 2);
        const double raw = spec.multiplier * pmd_gap_tau(type, posteriors(i, u) - posteriors(i, s));
        const double clipped = std::clamp(raw, 0.0, 1.0);
        CHECK(clipped >= 0.0);
        CHECK(clipped <= 1.0);
      }
    }
  }
}

TEST_CASE("hybrid corruption is feature-dependent first, overlay second") {
  BlobFixture fix(3000);
  const PmdNoiseSpec spec = calibrate_noise_level(fix.oracle, fix.train, PmdType::TypeI, 0.35);
  const auto [stage1, report1] = corrupt_feature_dependent(fix.oracle, fix.train, spec, 31);
  const auto [stage2, report2] = apply_transition(stage1, uniform_transition(2, 0.3), 32);

  // The overlay resamples from the feature-dependent output, so disagreement
  // with the Bayes channel lands between the two pure levels.
  double disagree = 0.0;
  for (std::int64_t i = 0; i < stage2.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    disagree += stage2.noisy_labels[idx] != stage2.bayes_labels[idx];
  }
  disagree /= static_cast<double>(stage2.size());
  CHECK(disagree > 0.35);
  CHECK(disagree < 0.65);
}
