#include "plc/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "plc/errors.hpp"

namespace plc {
namespace {

double json_double(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  // NaN serializes as null; map it back.
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return v.get<double>();
}

}  // namespace

nlohmann::json to_json(const NoiseReport& report) {
  nlohmann::json j;
  j["target_level"] = report.target_level;
  j["realized_level"] = report.realized_level;
  j["flip_count"] = report.flip_count;
  j["per_class_flips"] = report.per_class_flips;
  j["clean_disagreement"] = report.clean_disagreement;
  j["clean_label_mismatch"] = report.clean_label_mismatch;
  if (report.pmd_check) {
    const PmdCheckReport& check = *report.pmd_check;
    j["pmd_check"] = {{"t0", check.t0},
                      {"c1", check.c1},
                      {"c2", check.c2},
                      {"points_checked", check.points_checked},
                      {"points_exempt", check.points_exempt},
                      {"violation_count", check.violation_count},
                      {"worst_margin", check.worst_margin}};
  }
  return j;
}

nlohmann::json to_json(const RoundRecord& record) {
  nlohmann::json j;
  j["round"] = record.round;
  j["theta"] = record.theta;
  j["T"] = record.T;
  j["flips"] = record.flips;
  j["train_acc"] = record.train_accuracy;
  j["test_acc_bayes"] = record.test_accuracy_bayes;
  j["has_oracle_fields"] = record.has_oracle_fields;
  if (record.has_oracle_fields) {
    j["purity"] = record.purity;
    j["residual_margin"] = record.residual_margin;
    j["has_pure_level"] = record.has_pure_level;
    if (record.has_pure_level) j["min_pure_level"] = record.min_pure_level;
  }
  return j;
}

RoundRecord round_record_from_json(const nlohmann::json& j) {
  RoundRecord record;
  record.round = j.at("round").get<int>();
  record.theta = json_double(j, "theta");
  record.T = json_double(j, "T");
  record.flips = j.at("flips").get<std::int64_t>();
  record.train_accuracy = j.at("train_acc").get<double>();
  record.test_accuracy_bayes = j.at("test_acc_bayes").get<double>();
  record.has_oracle_fields = j.at("has_oracle_fields").get<bool>();
  if (record.has_oracle_fields) {
    record.purity = j.at("purity").get<double>();
    record.residual_margin = j.at("residual_margin").get<double>();
    record.has_pure_level = j.at("has_pure_level").get<bool>();
    if (record.has_pure_level) record.min_pure_level = j.at("min_pure_level").get<double>();
  }
  return record;
}

nlohmann::json to_json(const MarginProfile& profile) {
  nlohmann::json j;
  j["bins"] = profile.bins;
  j["samples"] = profile.samples;
  j["bin_edges"] = profile.bin_edges;
  j["counts"] = profile.counts;
  j["density"] = profile.density;
  j["c_low"] = profile.c_low;
  j["c_high"] = profile.c_high;
  j["imbalance"] = std::isfinite(profile.imbalance) ? nlohmann::json(profile.imbalance)
                                                    : nlohmann::json("inf");
  j["zero_mass_bins"] = profile.zero_mass_bins;
  return j;
}

nlohmann::json to_json(const TheoremParams& params) {
  nlohmann::json j;
  j["alpha"] = params.alpha;
  j["eps"] = params.eps;
  j["ell"] = params.ell;
  j["t0"] = params.t0;
  j["T0"] = params.T0;
  j["beta"] = params.beta;
  j["e0"] = params.e0;
  j["m_min_raw"] = params.m_min_raw;
  j["m_min"] = params.m_min;
  j["m_min_vacuous"] = params.m_min_vacuous;
  // Both conventions for the N and T_end conditions, no silent choice.
  j["n_min"] = {{"theorem", params.n_min_a}, {"lemma3", params.n_min_b}};
  j["t_end_max"] = {{"theorem", params.t_end_max_a}, {"lemma3", params.t_end_max_b}};
  j["beta_window"] = {{"low", params.beta_low}, {"high", params.beta_high}};
  j["beta_in_window"] = params.beta_in_window;
  return j;
}

nlohmann::json to_json(const Lemma1Trace& trace) {
  nlohmann::json j;
  j["alpha"] = trace.alpha;
  j["eps"] = trace.eps;
  j["ell"] = trace.ell;
  j["required_ratio"] = trace.required_ratio;
  j["rounds_applicable"] = trace.rounds_applicable;
  j["rounds_met"] = trace.rounds_met;
  nlohmann::json rounds = nlohmann::json::array();
  for (const Lemma1Round& r : trace.rounds) {
    nlohmann::json entry;
    entry["round"] = r.round;
    entry["applicable"] = r.applicable;
    if (r.applicable) {
      entry["level_prev"] = r.level_prev;
      entry["level_new"] = r.level_new;
      entry["growth_ratio"] = r.growth_ratio;
      entry["bound_met"] = r.bound_met;
    }
    rounds.push_back(entry);
  }
  j["rounds"] = rounds;
  return j;
}

void write_rounds_csv(const std::vector<RoundRecord>& rounds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "round,theta,T,flips,purity,train_acc,test_acc_bayes,residual_margin\n";
  char buffer[192];
  for (const RoundRecord& r : rounds) {
    std::snprintf(buffer, sizeof(buffer), "%d,%.9g,%.9g,%lld,%.9g,%.9g,%.9g,%.9g\n", r.round,
                  r.theta, r.T, static_cast<long long>(r.flips),
                  r.has_oracle_fields ? r.purity : std::numeric_limits<double>::quiet_NaN(),
                  r.train_accuracy, r.test_accuracy_bayes,
                  r.has_oracle_fields ? r.residual_margin
                                      : std::numeric_limits<double>::quiet_NaN());
    out << buffer;
  }
  if (!out) throw IoError("failed writing: " + path);
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing: " + path);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

}  // namespace plc
