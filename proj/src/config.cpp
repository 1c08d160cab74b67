#include "plc/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "plc/errors.hpp"

namespace plc {
namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, sep)) parts.push_back(trim(item));
  if (!s.empty() && s.back() == sep) parts.push_back("");
  return parts;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + key + ": '" + value + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for " + key + ": '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad unsigned value for " + key + ": '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("bad boolean value for " + key + ": '" + value + "'");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const std::string& part : split(value, ',')) out.push_back(parse_double(key, part));
  return out;
}

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

std::string join_doubles(const std::vector<double>& values, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += sep;
    out += format_double(values[i]);
  }
  return out;
}

/// Covariance grammar: scalar (isotropic), comma list (diagonal), or
/// semicolon-separated rows (full matrix).
void parse_covariance(const std::string& key, const std::string& value, int dimension,
                      GaussianComponent& comp) {
  if (value.find(';') != std::string::npos) {
    comp.full_cov = true;
    comp.cov.clear();
    const auto rows = split(value, ';');
    if (static_cast<int>(rows.size()) != dimension)
      throw ConfigError(key + ": full covariance needs " + std::to_string(dimension) + " rows");
    for (const auto& row : rows) {
      const auto entries = parse_double_list(key, row);
      if (static_cast<int>(entries.size()) != dimension)
        throw ConfigError(key + ": covariance row length mismatch");
      comp.cov.insert(comp.cov.end(), entries.begin(), entries.end());
    }
    return;
  }
  comp.full_cov = false;
  comp.cov = parse_double_list(key, value);
  if (comp.cov.size() == 1) comp.cov.assign(static_cast<std::size_t>(dimension), comp.cov[0]);
  if (static_cast<int>(comp.cov.size()) != dimension)
    throw ConfigError(key + ": diagonal covariance needs 1 or " + std::to_string(dimension) +
                      " entries");
}

}  // namespace

std::map<std::string, std::string> RunConfig::parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + " has empty key");
    if (kv.count(key)) throw ConfigError("duplicate config key: " + key);
    kv[key] = value;
  }
  return kv;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_kv(parse_kv_text(buffer.str()));
}

RunConfig RunConfig::from_kv(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;

  // First pass: dimensions needed to parse component covariances.
  if (auto it = kv.find("data.dim"); it != kv.end())
    cfg.data.dimension = static_cast<int>(parse_int("data.dim", it->second));
  if (auto it = kv.find("data.classes"); it != kv.end())
    cfg.data.num_classes = static_cast<int>(parse_int("data.classes", it->second));

  std::map<int, GaussianComponent> components;
  auto component_for = [&](const std::string& key, std::size_t prefix_len) -> GaussianComponent& {
    const std::size_t dot = key.find('.', prefix_len);
    if (dot == std::string::npos) throw ConfigError("bad component key: " + key);
    const int index = static_cast<int>(parse_int(key, key.substr(prefix_len, dot - prefix_len)));
    return components[index];
  };

  for (const auto& [key, value] : kv) {
    if (key == "seed") {
      cfg.seed = parse_u64(key, value);
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "data.kind") {
      cfg.data.kind = value;
    } else if (key == "data.n_train") {
      cfg.data.n_train = parse_int(key, value);
    } else if (key == "data.n_test") {
      cfg.data.n_test = parse_int(key, value);
    } else if (key == "data.dim" || key == "data.classes") {
      // handled above
    } else if (key.rfind("data.component", 0) == 0) {
      GaussianComponent& comp = component_for(key, std::string("data.component").size());
      const std::string field = key.substr(key.find('.', std::string("data.component").size()) + 1);
      if (field == "mean") {
        comp.mean = parse_double_list(key, value);
      } else if (field == "cov") {
        parse_covariance(key, value, cfg.data.dimension, comp);
      } else if (field == "prior") {
        comp.prior = parse_double(key, value);
      } else if (field == "class") {
        comp.class_id = static_cast<int>(parse_int(key, value));
      } else {
        throw ConfigError("unknown component field: " + key);
      }
    } else if (key == "data.csv_train") {
      cfg.data.csv_train = value;
    } else if (key == "data.csv_test") {
      cfg.data.csv_test = value;
    } else if (key == "data.oracle") {
      cfg.data.oracle_json = value;
    } else if (key == "noise.kind") {
      cfg.noise.kind = value;
    } else if (key == "noise.level") {
      cfg.noise.level = parse_double(key, value);
    } else if (key == "noise.overlay_kind") {
      cfg.noise.overlay_kind = value;
    } else if (key == "noise.overlay_level") {
      cfg.noise.overlay_level = parse_double(key, value);
    } else if (key == "noise.seed") {
      cfg.noise.seed = parse_u64(key, value);
    } else if (key == "model.hidden") {
      cfg.model.hidden.clear();
      if (!value.empty()) {
        for (const auto& part : split(value, ',')) {
          cfg.model.hidden.push_back(static_cast<int>(parse_int(key, part)));
        }
      }
    } else if (key == "model.activation") {
      cfg.model.activation = value;
    } else if (key == "model.lr") {
      cfg.model.learning_rate = parse_double(key, value);
    } else if (key == "model.batch") {
      cfg.model.batch_size = static_cast<int>(parse_int(key, value));
    } else if (key == "schedule.mode") {
      cfg.schedule.mode = value;
    } else if (key == "schedule.T0") {
      cfg.schedule.T0 = parse_double(key, value);
    } else if (key == "schedule.T_end") {
      cfg.schedule.T_end = parse_double(key, value);
    } else if (key == "schedule.r0") {
      cfg.schedule.r0 = parse_double(key, value);
    } else if (key == "schedule.r_end") {
      cfg.schedule.r_end = parse_double(key, value);
    } else if (key == "schedule.beta") {
      cfg.schedule.beta = parse_double(key, value);
    } else if (key == "schedule.warmup") {
      cfg.schedule.warmup = static_cast<int>(parse_int(key, value));
    } else if (key == "schedule.rounds") {
      cfg.schedule.rounds = static_cast<int>(parse_int(key, value));
    } else if (key == "schedule.correct_during_warmup") {
      cfg.schedule.correct_during_warmup = parse_bool(key, value);
    } else if (key == "theory.alpha") {
      cfg.theory.alpha = parse_double(key, value);
    } else if (key == "theory.eps") {
      cfg.theory.eps = parse_double(key, value);
    } else if (key == "theory.t0") {
      cfg.theory.t0 = parse_double(key, value);
    } else if (key == "theory.margin_bins") {
      cfg.theory.margin_bins = static_cast<int>(parse_int(key, value));
    } else if (key.rfind("sweep.grid.", 0) == 0) {
      const std::string axis = key.substr(std::string("sweep.grid.").size());
      if (axis.empty()) throw ConfigError("empty sweep axis key");
      cfg.sweep.grid[axis] = split(value, ',');
    } else if (key == "sweep.repeats") {
      cfg.sweep.repeats = static_cast<int>(parse_int(key, value));
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }

  for (auto& [index, comp] : components) {
    (void)index;
    cfg.data.components.push_back(std::move(comp));
  }
  cfg.validate();
  return cfg;
}

std::map<std::string, std::string> RunConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(seed);
  kv["out"] = out_dir;
  kv["data.kind"] = data.kind;
  kv["data.n_train"] = std::to_string(data.n_train);
  kv["data.n_test"] = std::to_string(data.n_test);
  kv["data.dim"] = std::to_string(data.dimension);
  kv["data.classes"] = std::to_string(data.num_classes);
  for (std::size_t k = 0; k < data.components.size(); ++k) {
    const auto& comp = data.components[k];
    const std::string prefix = "data.component" + std::to_string(k) + ".";
    kv[prefix + "mean"] = join_doubles(comp.mean);
    if (comp.full_cov) {
      std::string rows;
      const int d = data.dimension;
      for (int r = 0; r < d; ++r) {
        if (r > 0) rows += ';';
        rows += join_doubles(std::vector<double>(comp.cov.begin() + r * d,
                                                 comp.cov.begin() + (r + 1) * d));
      }
      kv[prefix + "cov"] = rows;
    } else {
      kv[prefix + "cov"] = join_doubles(comp.cov);
    }
    kv[prefix + "prior"] = format_double(comp.prior);
    kv[prefix + "class"] = std::to_string(comp.class_id);
  }
  if (!data.csv_train.empty()) kv["data.csv_train"] = data.csv_train;
  if (!data.csv_test.empty()) kv["data.csv_test"] = data.csv_test;
  if (!data.oracle_json.empty()) kv["data.oracle"] = data.oracle_json;

  kv["noise.kind"] = noise.kind;
  kv["noise.level"] = format_double(noise.level);
  kv["noise.overlay_kind"] = noise.overlay_kind;
  kv["noise.overlay_level"] = format_double(noise.overlay_level);
  if (noise.seed) kv["noise.seed"] = std::to_string(*noise.seed);

  std::string hidden;
  for (std::size_t i = 0; i < model.hidden.size(); ++i) {
    if (i > 0) hidden += ',';
    hidden += std::to_string(model.hidden[i]);
  }
  kv["model.hidden"] = hidden;
  kv["model.activation"] = model.activation;
  kv["model.lr"] = format_double(model.learning_rate);
  kv["model.batch"] = std::to_string(model.batch_size);

  kv["schedule.mode"] = schedule.mode;
  kv["schedule.T0"] = format_double(schedule.T0);
  kv["schedule.T_end"] = format_double(schedule.T_end);
  kv["schedule.r0"] = format_double(schedule.r0);
  kv["schedule.r_end"] = format_double(schedule.r_end);
  kv["schedule.beta"] = format_double(schedule.beta);
  kv["schedule.warmup"] = std::to_string(schedule.warmup);
  kv["schedule.rounds"] = std::to_string(schedule.rounds);
  kv["schedule.correct_during_warmup"] = schedule.correct_during_warmup ? "true" : "false";

  kv["theory.alpha"] = format_double(theory.alpha);
  kv["theory.eps"] = format_double(theory.eps);
  kv["theory.t0"] = format_double(theory.t0);
  kv["theory.margin_bins"] = std::to_string(theory.margin_bins);

  for (const auto& [axis, values] : sweep.grid) {
    std::string joined;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) joined += ',';
      joined += values[i];
    }
    kv["sweep.grid." + axis] = joined;
  }
  if (!sweep.grid.empty()) kv["sweep.repeats"] = std::to_string(sweep.repeats);
  return kv;
}

void RunConfig::validate() const {
  if (data.kind != "mixture" && data.kind != "csv")
    throw ConfigError("data.kind must be mixture or csv");
  if (data.kind == "mixture") {
    if (data.n_train < 1 || data.n_test < 1)
      throw ConfigError("data.n_train and data.n_test must be >= 1");
    try {
      mixture_spec().validate();
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("bad mixture spec: ") + e.what());
    }
  } else if (data.csv_train.empty()) {
    throw ConfigError("data.kind = csv requires data.csv_train");
  }

  static const char* kNoiseKinds[] = {"type1", "type2", "type3", "uniform",
                                      "asymmetric", "hybrid", "none"};
  if (std::find_if(std::begin(kNoiseKinds), std::end(kNoiseKinds),
                   [&](const char* k) { return noise.kind == k; }) == std::end(kNoiseKinds)) {
    throw ConfigError("unknown noise.kind: " + noise.kind);
  }
  if (noise.level < 0.0 || noise.level >= 1.0) throw ConfigError("noise.level outside [0, 1)");
  if (noise.kind == "hybrid" &&
      noise.overlay_kind != "uniform" && noise.overlay_kind != "asymmetric") {
    throw ConfigError("noise.overlay_kind must be uniform or asymmetric");
  }
  if (noise.kind == "hybrid" && noise.overlay_level <= 0.0)
    throw ConfigError("hybrid noise requires noise.overlay_level > 0");
  if (noise.overlay_level < 0.0 || noise.overlay_level >= 1.0)
    throw ConfigError("noise.overlay_level outside [0, 1)");

  if (model.activation != "relu" && model.activation != "tanh")
    throw ConfigError("model.activation must be relu or tanh");
  if (model.learning_rate <= 0.0) throw ConfigError("model.lr must be positive");
  if (model.batch_size < 1) throw ConfigError("model.batch must be >= 1");

  if (schedule.mode != "binary" && schedule.mode != "multiclass")
    throw ConfigError("schedule.mode must be binary or multiclass");
  try {
    correction_schedule().validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("bad schedule: ") + e.what());
  }

  if (theory.margin_bins < 5) throw ConfigError("theory.margin_bins must be >= 5");
  if (sweep.repeats < 1) throw ConfigError("sweep.repeats must be >= 1");
}

MixtureSpec RunConfig::mixture_spec() const {
  if (data.components.empty()) {
    MixtureSpec spec = default_blob_spec();
    if (data.dimension != 2 || data.num_classes != 2)
      throw ConfigError("non-default data.dim/data.classes require explicit components");
    return spec;
  }
  MixtureSpec spec;
  spec.dimension = data.dimension;
  spec.num_classes = data.num_classes;
  spec.components = data.components;
  return spec;
}

CorrectionSchedule RunConfig::correction_schedule() const {
  CorrectionSchedule out;
  out.mode = schedule.mode == "binary" ? CorrectionMode::Binary : CorrectionMode::Multiclass;
  out.initial_threshold = schedule.T0;
  out.end_threshold = schedule.T_end;
  out.initial_ratio = schedule.r0;
  out.end_ratio = schedule.r_end;
  out.beta = schedule.beta;
  out.warmup_rounds = schedule.warmup;
  out.total_rounds = schedule.rounds;
  out.correct_during_warmup = schedule.correct_during_warmup;
  return out;
}

Architecture RunConfig::architecture(int input_dim, int num_classes) const {
  Architecture arch;
  arch.input = input_dim;
  arch.hidden = model.hidden;
  arch.output = num_classes;
  arch.activation = model.activation == "relu" ? Activation::Relu : Activation::Tanh;
  return arch;
}

TrainConfig RunConfig::train_config() const {
  return TrainConfig{model.learning_rate, model.batch_size};
}

}  // namespace plc
