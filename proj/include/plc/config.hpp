#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plc/correction.hpp"
#include "plc/datagen.hpp"
#include "plc/model.hpp"

namespace plc {

/// Parsed run configuration. The on-disk format is flat `key = value` text
/// with dotted section keys and `#` comments; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "out";

  struct Data {
    std::string kind = "mixture";  // mixture | csv
    std::int64_t n_train = 10000;
    std::int64_t n_test = 4000;
    int dimension = 2;
    int num_classes = 2;
    std::vector<GaussianComponent> components;  // empty -> default blob
    std::string csv_train;
    std::string csv_test;
    std::string oracle_json;
  } data;

  struct Noise {
    std::string kind = "type1";  // type1|type2|type3|uniform|asymmetric|hybrid|none
    double level = 0.35;
    std::string overlay_kind = "uniform";  // hybrid overlay: uniform|asymmetric
    double overlay_level = 0.0;            // hybrid requires > 0
    std::optional<std::uint64_t> seed;  // derived from the master seed when unset
  } noise;

  struct Model {
    std::vector<int> hidden = {32, 32};
    std::string activation = "relu";
    double learning_rate = 0.01;
    int batch_size = 128;
  } model;

  struct Schedule {
    std::string mode = "binary";
    double T0 = 0.1;
    double T_end = 0.45;
    double r0 = 0.3;
    double r_end = 1.0;
    double beta = 0.1;
    int warmup = 20;
    int rounds = 180;
    bool correct_during_warmup = true;
  } schedule;

  struct Theory {
    double alpha = 1.0;
    double eps = 0.05;
    double t0 = 0.1;
    int margin_bins = 10;
  } theory;

  struct Sweep {
    // Axis key -> raw values; the Cartesian product defines the grid.
    std::map<std::string, std::vector<std::string>> grid;
    int repeats = 3;
  } sweep;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_kv(const std::map<std::string, std::string>& kv);
  static std::map<std::string, std::string> parse_kv_text(const std::string& text);

  /// Flat key-value echo; from_kv(to_kv()) reproduces an equivalent config.
  std::map<std::string, std::string> to_kv() const;

  void validate() const;

  MixtureSpec mixture_spec() const;
  CorrectionSchedule correction_schedule() const;
  Architecture architecture(int input_dim, int num_classes) const;
  TrainConfig train_config() const;
};

}  // namespace plc
