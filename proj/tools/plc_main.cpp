#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "plc/errors.hpp"
#include "plc/parallel.hpp"
#include "plc/pipeline.hpp"
#include "plc/version.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int jobs = 0;
};

plc::RunConfig resolve_config(const GlobalOptions& options) {
  plc::RunConfig config = options.config_path.empty()
                              ? plc::RunConfig{}
                              : plc::RunConfig::from_file(options.config_path);
  if (options.seed) config.seed = *options.seed;
  if (!options.out_dir.empty()) config.out_dir = options.out_dir;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive label correction experiments on synthetic mixtures"};
  app.set_version_flag("--version", plc::kVersion);
  app.require_subcommand(1);

  GlobalOptions options;
  app.add_option("--config", options.config_path, "Run configuration file (key = value lines)");
  app.add_option("--seed", options.seed, "Master seed override");
  app.add_option("--out", options.out_dir, "Output directory override");
  app.add_option("--jobs", options.jobs, "Max worker threads (0 = library default)");

  std::string report_path;
  CLI::App* gen = app.add_subcommand("gen", "Generate dataset CSVs and the oracle sidecar");
  CLI::App* corrupt = app.add_subcommand("corrupt", "Apply configured noise to dataset CSVs");
  CLI::App* run = app.add_subcommand("run", "Full pipeline with progressive label correction");
  CLI::App* standard =
      app.add_subcommand("standard", "Baseline: identical budget, no correction");
  CLI::App* sweep = app.add_subcommand("sweep", "Cartesian parameter sweep of full runs");
  CLI::App* check = app.add_subcommand("check-theory", "Margin profile and parameter conditions");
  check->add_option("--report", report_path, "Analyze an existing report.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (options.jobs > 0) plc::par::set_max_threads(options.jobs);
    const plc::RunConfig config = resolve_config(options);

    if (gen->parsed()) {
      plc::cmd_gen(config);
    } else if (corrupt->parsed()) {
      plc::cmd_corrupt(config);
    } else if (run->parsed()) {
      plc::cmd_run(config);
    } else if (standard->parsed()) {
      plc::cmd_standard(config);
    } else if (sweep->parsed()) {
      plc::cmd_sweep(config);
    } else if (check->parsed()) {
      plc::cmd_check_theory(config, report_path);
    }
    return 0;
  } catch (const plc::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const plc::ValidationError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const plc::InfeasibleTargetError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const plc::MissingOracleError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const plc::UnsupportedError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
