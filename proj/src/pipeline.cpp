#include "plc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "plc/dataset_io.hpp"
#include "plc/errors.hpp"
#include "plc/parallel.hpp"
#include "plc/report.hpp"
#include "plc/rng.hpp"
#include "plc/theory.hpp"
#include "plc/version.hpp"

namespace plc {
namespace {

namespace fs = std::filesystem;

// Sub-stream tags hanging off the master seed.
enum : std::uint64_t {
  kSeedData = 101,
  kSeedNoise = 102,
  kSeedModel = 103,
  kSeedTrain = 104,
  kSeedOverlay = 105,
};

PmdType pmd_type_from_kind(const std::string& kind) {
  if (kind == "type1" || kind == "hybrid") return PmdType::TypeI;
  if (kind == "type2") return PmdType::TypeII;
  if (kind == "type3") return PmdType::TypeIII;
  throw ConfigError("not a feature-dependent noise kind: " + kind);
}

bool is_feature_dependent(const std::string& kind) {
  return kind == "type1" || kind == "type2" || kind == "type3" || kind == "hybrid";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

nlohmann::json config_echo(const RunConfig& config) {
  nlohmann::json echo = nlohmann::json::object();
  for (const auto& [key, value] : config.to_kv()) echo[key] = value;
  return echo;
}

/// Recounts a combined report against the Bayes channel after hybrid noise.
NoiseReport recount_vs_bayes(const WorkingDataset& dataset, const NoiseReport& base) {
  NoiseReport report = base;
  report.flip_count = 0;
  report.per_class_flips.assign(static_cast<std::size_t>(dataset.num_classes), 0);
  std::int64_t clean_disagree = 0;
  for (std::int64_t i = 0; i < dataset.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (dataset.noisy_labels[idx] != dataset.bayes_labels[idx]) {
      ++report.flip_count;
      ++report.per_class_flips[static_cast<std::size_t>(dataset.bayes_labels[idx])];
    }
    if (dataset.noisy_labels[idx] != dataset.clean_labels[idx]) ++clean_disagree;
  }
  report.realized_level =
      static_cast<double>(report.flip_count) / static_cast<double>(dataset.size());
  report.clean_disagreement =
      static_cast<double>(clean_disagree) / static_cast<double>(dataset.size());
  return report;
}

}  // namespace

PipelineData prepare_data(const RunConfig& config) {
  PipelineData data;
  if (config.data.kind == "mixture") {
    auto [train, test, oracle] =
        make_gaussian_mixture(config.mixture_spec(), config.data.n_train, config.data.n_test,
                              rng::derive(config.seed, kSeedData));
    data.train = std::move(train);
    data.test = std::move(test);
    data.oracle.emplace(std::move(oracle));
    return data;
  }
  data.train = read_dataset_csv(config.data.csv_train);
  data.train.split = "train";
  if (!config.data.csv_test.empty()) {
    data.test = read_dataset_csv(config.data.csv_test, data.train.num_classes);
    data.test.split = "test";
  }
  if (!config.data.oracle_json.empty()) {
    data.oracle.emplace(read_mixture_json(config.data.oracle_json));
  }
  return data;
}

NoiseReport apply_noise(const RunConfig& config, PipelineData& data) {
  const std::uint64_t noise_seed =
      config.noise.seed ? *config.noise.seed : rng::derive(config.seed, kSeedNoise);

  if (config.noise.kind == "none" || config.noise.level == 0.0) {
    if (config.noise.kind != "none" && is_feature_dependent(config.noise.kind) &&
        config.noise.level == 0.0 && data.oracle) {
      // Level-0 calibration is still exercised so the zero-noise contract holds.
      const PmdNoiseSpec spec = calibrate_noise_level(
          *data.oracle, data.train, pmd_type_from_kind(config.noise.kind), 0.0);
      auto [corrupted, report] =
          corrupt_feature_dependent(*data.oracle, data.train, spec, noise_seed);
      data.train = std::move(corrupted);
      return report;
    }
    NoiseReport report;
    report.per_class_flips.assign(static_cast<std::size_t>(data.train.num_classes), 0);
    return report;
  }

  if (is_feature_dependent(config.noise.kind)) {
    if (!data.oracle)
      throw MissingOracleError("feature-dependent noise requires a posterior oracle");
    const PmdType type = pmd_type_from_kind(config.noise.kind);
    const PmdNoiseSpec spec =
        calibrate_noise_level(*data.oracle, data.train, type, config.noise.level);
    auto [corrupted, report] =
        corrupt_feature_dependent(*data.oracle, data.train, spec, noise_seed);
    report.target_level = config.noise.level;

    // Fit the smallest c1 (at c2 = 1 and the configured margin) for which the
    // calibrated noise satisfies the polynomial bound on this sample.
    if (data.oracle->num_classes() == 2) {
      const double t0 = std::clamp(config.theory.t0, 0.05, 0.45);
      const double c1 = min_c1_for_pmd(spec, *data.oracle, t0, 1.0, data.train.features);
      report.pmd_check = verify_pmd(spec, *data.oracle, t0, c1, 1.0, data.train.features);
    }
    data.train = std::move(corrupted);

    const bool overlay = config.noise.kind == "hybrid" || config.noise.overlay_level > 0.0;
    if (overlay) {
      if (config.noise.overlay_level <= 0.0)
        throw ConfigError("hybrid noise requires noise.overlay_level > 0");
      const int C = data.train.num_classes;
      const TransitionMatrix tm =
          config.noise.overlay_kind == "uniform"
              ? uniform_transition(C, config.noise.overlay_level)
              : asymmetric_transition(C, config.noise.overlay_level, cyclic_mapping(C));
      auto [overlaid, overlay_report] =
          apply_transition(data.train, tm, rng::derive(noise_seed, kSeedOverlay));
      data.train = std::move(overlaid);
      report = recount_vs_bayes(data.train, report);
    }
    return report;
  }

  // Pure i.i.d. transition noise on the clean labels.
  const int C = data.train.num_classes;
  const TransitionMatrix tm = config.noise.kind == "uniform"
                                  ? uniform_transition(C, config.noise.level)
                                  : asymmetric_transition(C, config.noise.level, cyclic_mapping(C));
  auto [corrupted, report] = apply_transition(data.train, tm, noise_seed);
  data.train = std::move(corrupted);
  return report;
}

namespace {

struct FullArtifacts {
  RunArtifacts summary;
  WorkingDataset final_train;
  std::optional<SoftmaxClassifier> classifier;
  std::optional<MixtureSpec> oracle_spec;
};

FullArtifacts execute_run_full(const RunConfig& config, bool standard,
                               const RoundObserver& observer) {
  config.validate();
  const auto start_time = std::chrono::steady_clock::now();

  PipelineData data = prepare_data(config);
  const NoiseReport noise_report = apply_noise(config, data);
  const double initial_purity = purity(data.train.noisy_labels, data.train.bayes_labels);

  const Architecture arch = config.architecture(static_cast<int>(data.train.features.cols),
                                                data.train.num_classes);
  SoftmaxClassifier classifier(arch, rng::derive(config.seed, kSeedModel));
  const CorrectionSchedule schedule = config.correction_schedule();
  const TrainConfig train_config = config.train_config();
  const PosteriorOracle* oracle = data.oracle ? &*data.oracle : nullptr;
  const WorkingDataset* test = data.test.size() > 0 ? &data.test : nullptr;
  const std::uint64_t train_seed = rng::derive(config.seed, kSeedTrain);

  const PlcRunResult run = standard
                               ? run_standard(data.train, classifier, schedule.total_rounds,
                                              train_config, oracle, test, train_seed)
                               : run_plc(data.train, classifier, schedule, train_config, oracle,
                                         test, train_seed, observer);

  FullArtifacts artifacts;
  RunArtifacts& summary = artifacts.summary;
  summary.rounds = run.rounds;
  summary.initial_purity = initial_purity;
  summary.final_purity = purity(data.train.working_labels, data.train.bayes_labels);
  summary.final_test_accuracy =
      test != nullptr ? classifier.accuracy(test->features, test->bayes_labels) : 0.0;

  nlohmann::json report;
  report["version"] = kVersion;
  report["command"] = standard ? "standard" : "run";
  report["config"] = config_echo(config);
  report["noise"] = to_json(noise_report);

  nlohmann::json rounds_json = nlohmann::json::array();
  for (const RoundRecord& record : run.rounds) rounds_json.push_back(to_json(record));
  report["rounds"] = std::move(rounds_json);

  nlohmann::json final_json;
  final_json["rounds_executed"] = static_cast<std::int64_t>(run.rounds.size());
  final_json["total_flips"] = run.total_flips;
  final_json["initial_purity"] = summary.initial_purity;
  final_json["final_purity"] = summary.final_purity;
  if (test != nullptr) {
    final_json["test_acc_bayes"] = summary.final_test_accuracy;
    final_json["test_acc_clean"] = classifier.accuracy(test->features, test->clean_labels);
  }

  // Margin split of the corrected vs still-incorrect points (binary oracle).
  if (oracle != nullptr && oracle->num_classes() == 2) {
    const std::vector<double> margins = oracle->margins(data.train.features);
    double corrected_sum = 0.0, residual_sum = 0.0;
    std::int64_t corrected_count = 0, residual_count = 0;
    for (std::int64_t i = 0; i < data.train.size(); ++i) {
      const auto idx = static_cast<std::size_t>(i);
      if (data.train.working_labels[idx] != data.train.noisy_labels[idx]) {
        corrected_sum += margins[idx];
        ++corrected_count;
      }
      if (data.train.working_labels[idx] != data.train.bayes_labels[idx]) {
        residual_sum += margins[idx];
        ++residual_count;
      }
    }
    final_json["corrected_count"] = corrected_count;
    final_json["residual_incorrect_count"] = residual_count;
    final_json["mean_margin_corrected"] =
        corrected_count > 0 ? corrected_sum / static_cast<double>(corrected_count)
                            : std::numeric_limits<double>::quiet_NaN();
    final_json["mean_margin_residual_incorrect"] =
        residual_count > 0 ? residual_sum / static_cast<double>(residual_count)
                           : std::numeric_limits<double>::quiet_NaN();
  }
  report["final"] = std::move(final_json);

  if (oracle != nullptr && oracle->num_classes() == 2) {
    nlohmann::json theory_json;
    const MarginProfile profile =
        margin_density(*oracle, data.train.features, config.theory.margin_bins);
    theory_json["margin_profile"] = to_json(profile);

    const double ell = std::isfinite(profile.imbalance) ? std::max(1.0, profile.imbalance) : 0.0;
    if (ell >= 1.0) {
      try {
        theory_json["theorem_params"] =
            to_json(theorem_bounds(config.theory.alpha, config.theory.eps, ell, config.theory.t0,
                                   config.schedule.T0, config.schedule.beta));
      } catch (const ValidationError& e) {
        theory_json["theorem_params"] = {{"error", e.what()}};
      }
      nlohmann::json trace_json =
          to_json(lemma1_trace(run.rounds, config.theory.alpha, config.theory.eps, ell));
      trace_json["baseline"] = standard;
      theory_json["lemma1_trace"] = std::move(trace_json);
    } else {
      theory_json["theorem_params"] = {{"error", "margin density has empty bins"}};
    }
    report["theory"] = std::move(theory_json);
  }

  const auto elapsed = std::chrono::steady_clock::now() - start_time;
  report["wall_clock_seconds"] =
      std::chrono::duration_cast<std::chrono::duration<double>>(elapsed).count();

  summary.report = std::move(report);
  artifacts.final_train = std::move(data.train);
  artifacts.classifier.emplace(std::move(classifier));
  if (data.oracle) artifacts.oracle_spec = data.oracle->spec();
  return artifacts;
}

void persist_run(const RunConfig& config, const FullArtifacts& artifacts) {
  ensure_dir(config.out_dir);
  const fs::path out(config.out_dir);
  write_json_file(artifacts.summary.report, (out / "report.json").string());
  write_rounds_csv(artifacts.summary.rounds, (out / "rounds.csv").string());
  write_dataset_csv(artifacts.final_train, (out / "train_final.csv").string());
  if (artifacts.classifier) artifacts.classifier->save((out / "model.ckpt").string());
  if (artifacts.oracle_spec) write_mixture_json(*artifacts.oracle_spec, (out / "oracle.json").string());
}

}  // namespace

RunArtifacts execute_run(const RunConfig& config, bool standard, const RoundObserver& observer) {
  return execute_run_full(config, standard, observer).summary;
}

void cmd_gen(const RunConfig& config) {
  config.validate();
  if (config.data.kind != "mixture")
    throw ConfigError("gen requires data.kind = mixture");
  PipelineData data = prepare_data(config);
  ensure_dir(config.out_dir);
  const fs::path out(config.out_dir);
  write_dataset_csv(data.train, (out / "train.csv").string());
  write_dataset_csv(data.test, (out / "test.csv").string());
  write_mixture_json(data.oracle->spec(), (out / "oracle.json").string());
  std::printf("gen: wrote %lld train and %lld test rows to %s\n",
              static_cast<long long>(data.train.size()), static_cast<long long>(data.test.size()),
              config.out_dir.c_str());
}

void cmd_corrupt(const RunConfig& config) {
  config.validate();
  const fs::path out(config.out_dir);
  PipelineData data;
  const std::string train_path = !config.data.csv_train.empty()
                                     ? config.data.csv_train
                                     : (out / "train.csv").string();
  data.train = read_dataset_csv(train_path);
  data.train.split = "train";

  std::string oracle_path = config.data.oracle_json;
  if (oracle_path.empty()) {
    const std::string candidate = (out / "oracle.json").string();
    if (fs::exists(candidate)) oracle_path = candidate;
  }
  if (!oracle_path.empty()) data.oracle.emplace(read_mixture_json(oracle_path));

  const NoiseReport report = apply_noise(config, data);
  ensure_dir(config.out_dir);
  write_dataset_csv(data.train, (out / "train_corrupted.csv").string());

  nlohmann::json j;
  j["version"] = kVersion;
  j["command"] = "corrupt";
  j["config"] = config_echo(config);
  j["noise"] = to_json(report);
  write_json_file(j, (out / "noise_report.json").string());
  std::printf("corrupt: %s level %.4g realized %.4g (%lld flips)\n", config.noise.kind.c_str(),
              report.target_level, report.realized_level,
              static_cast<long long>(report.flip_count));
}

void cmd_run(const RunConfig& config) {
  const FullArtifacts artifacts = execute_run_full(config, false, {});
  persist_run(config, artifacts);
  std::printf("run: purity %.4f -> %.4f, test acc vs bayes %.4f, %lld total flips\n",
              artifacts.summary.initial_purity, artifacts.summary.final_purity,
              artifacts.summary.final_test_accuracy,
              artifacts.summary.report["final"]["total_flips"].get<long long>());
}

void cmd_standard(const RunConfig& config) {
  const FullArtifacts artifacts = execute_run_full(config, true, {});
  persist_run(config, artifacts);
  std::printf("standard: purity stays %.4f, test acc vs bayes %.4f\n",
              artifacts.summary.final_purity, artifacts.summary.final_test_accuracy);
}

void cmd_sweep(const RunConfig& config) {
  config.validate();
  ensure_dir(config.out_dir);
  const fs::path out(config.out_dir);

  std::vector<std::pair<std::string, std::vector<std::string>>> axes(config.sweep.grid.begin(),
                                                                     config.sweep.grid.end());
  std::int64_t cell_count = axes.empty() ? 0 : 1;
  for (const auto& [axis, values] : axes) {
    if (values.empty()) throw ConfigError("sweep axis " + axis + " has no values");
    cell_count *= static_cast<std::int64_t>(values.size());
  }

  std::ofstream csv((out / "sweep.csv").string());
  if (!csv) throw IoError("cannot open sweep.csv for writing");
  csv << "cell";
  for (const auto& [axis, values] : axes) {
    (void)values;
    csv << ',' << axis;
  }
  csv << ",repeats,final_purity_mean,final_purity_std,test_acc_bayes_mean,test_acc_bayes_std,"
         "status\n";
  if (cell_count == 0) {
    return;
  }

  const int repeats = config.sweep.repeats;
  const std::int64_t total_runs = cell_count * repeats;
  const std::map<std::string, std::string> base_kv = config.to_kv();

  struct RunOutcome {
    bool ok = false;
    std::string error;
    double final_purity = 0.0;
    double test_accuracy = 0.0;
  };
  std::vector<RunOutcome> outcomes(static_cast<std::size_t>(total_runs));

  auto cell_values = [&](std::int64_t cell) {
    std::vector<std::string> values(axes.size());
    std::int64_t rest = cell;
    for (std::size_t a = axes.size(); a-- > 0;) {
      const auto& axis_values = axes[a].second;
      values[a] = axis_values[static_cast<std::size_t>(rest % axis_values.size())];
      rest /= static_cast<std::int64_t>(axis_values.size());
    }
    return values;
  };

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t run_index = 0; run_index < total_runs; ++run_index) {
    const std::int64_t cell = run_index / repeats;
    const int repeat = static_cast<int>(run_index % repeats);
    RunOutcome& outcome = outcomes[static_cast<std::size_t>(run_index)];
    try {
      std::map<std::string, std::string> kv = base_kv;
      const std::vector<std::string> values = cell_values(cell);
      for (std::size_t a = 0; a < axes.size(); ++a) kv[axes[a].first] = values[a];
      // Drop the grid keys from the per-cell config.
      for (auto it = kv.begin(); it != kv.end();) {
        if (it->first.rfind("sweep.", 0) == 0) {
          it = kv.erase(it);
        } else {
          ++it;
        }
      }
      kv["seed"] = std::to_string(
          rng::derive(config.seed, rng::mix(static_cast<std::uint64_t>(cell),
                                            static_cast<std::uint64_t>(repeat))));
      kv["out"] = (out / ("cell" + std::to_string(cell) + "_rep" + std::to_string(repeat)))
                      .string();
      RunConfig cell_config = RunConfig::from_kv(kv);
      const FullArtifacts artifacts = execute_run_full(cell_config, false, {});
      persist_run(cell_config, artifacts);
      outcome.ok = true;
      outcome.final_purity = artifacts.summary.final_purity;
      outcome.test_accuracy = artifacts.summary.final_test_accuracy;
    } catch (const std::exception& e) {
      outcome.error = e.what();
    }
  }

  char buffer[64];
  for (std::int64_t cell = 0; cell < cell_count; ++cell) {
    double purity_sum = 0.0, purity_sq = 0.0, acc_sum = 0.0, acc_sq = 0.0;
    int ok_count = 0;
    std::string first_error;
    for (int repeat = 0; repeat < repeats; ++repeat) {
      const RunOutcome& outcome = outcomes[static_cast<std::size_t>(cell * repeats + repeat)];
      if (!outcome.ok) {
        if (first_error.empty()) first_error = outcome.error;
        continue;
      }
      ++ok_count;
      purity_sum += outcome.final_purity;
      purity_sq += outcome.final_purity * outcome.final_purity;
      acc_sum += outcome.test_accuracy;
      acc_sq += outcome.test_accuracy * outcome.test_accuracy;
    }

    csv << cell;
    for (const std::string& value : cell_values(cell)) csv << ',' << value;
    csv << ',' << ok_count;
    if (ok_count > 0) {
      const double pm = purity_sum / ok_count;
      const double am = acc_sum / ok_count;
      const double pv = std::max(0.0, purity_sq / ok_count - pm * pm);
      const double av = std::max(0.0, acc_sq / ok_count - am * am);
      for (double v : {pm, std::sqrt(pv), am, std::sqrt(av)}) {
        std::snprintf(buffer, sizeof(buffer), ",%.9g", v);
        csv << buffer;
      }
      csv << (first_error.empty() ? ",ok" : ",partial") << '\n';
    } else {
      csv << ",nan,nan,nan,nan,error: " << first_error << '\n';
    }
  }
  if (!csv) throw IoError("failed writing sweep.csv");
  std::printf("sweep: %lld cells x %d repeats written to %s\n",
              static_cast<long long>(cell_count), repeats,
              (out / "sweep.csv").string().c_str());
}

void cmd_check_theory(const RunConfig& cli_config, const std::string& report_path) {
  RunConfig config = cli_config;
  std::vector<RoundRecord> rounds;
  bool baseline = false;
  bool have_rounds = false;

  if (!report_path.empty()) {
    const nlohmann::json report = read_json_file(report_path);
    std::map<std::string, std::string> kv;
    for (const auto& [key, value] : report.at("config").items()) {
      kv[key] = value.get<std::string>();
    }
    config = RunConfig::from_kv(kv);
    config.out_dir = cli_config.out_dir;
    baseline = report.at("command").get<std::string>() == "standard";
    for (const auto& record_json : report.at("rounds")) {
      rounds.push_back(round_record_from_json(record_json));
    }
    have_rounds = true;
  }
  config.validate();

  PipelineData data = prepare_data(config);
  if (!data.oracle) throw MissingOracleError("check-theory requires a posterior oracle");
  if (data.oracle->num_classes() != 2)
    throw UnsupportedError("check-theory margin analysis is binary only");

  nlohmann::json theory_json;
  theory_json["version"] = kVersion;
  theory_json["command"] = "check-theory";
  const MarginProfile profile =
      margin_density(*data.oracle, data.train.features, config.theory.margin_bins);
  theory_json["margin_profile"] = to_json(profile);

  const double ell = std::isfinite(profile.imbalance) ? std::max(1.0, profile.imbalance) : 0.0;
  if (ell >= 1.0) {
    try {
      theory_json["theorem_params"] =
          to_json(theorem_bounds(config.theory.alpha, config.theory.eps, ell, config.theory.t0,
                                 config.schedule.T0, config.schedule.beta));
    } catch (const ValidationError& e) {
      theory_json["theorem_params"] = {{"error", e.what()}};
    }
  } else {
    theory_json["theorem_params"] = {{"error", "margin density has empty bins"}};
  }

  if (have_rounds) {
    if (rounds.empty() || !rounds.front().has_oracle_fields)
      throw MissingOracleError("report rounds lack oracle-backed fields");
    nlohmann::json trace_json =
        to_json(lemma1_trace(rounds, config.theory.alpha, config.theory.eps,
                             ell >= 1.0 ? ell : 1.0));
    trace_json["baseline"] = baseline;
    theory_json["lemma1_trace"] = std::move(trace_json);
  }

  ensure_dir(config.out_dir);
  write_json_file(theory_json, (fs::path(config.out_dir) / "theory.json").string());
  std::printf("check-theory: c_low %.4g c_high %.4g imbalance %.4g%s\n", profile.c_low,
              profile.c_high, profile.imbalance,
              have_rounds ? (baseline ? " (baseline trace)" : " (run trace)") : "");
}

}  // namespace plc
