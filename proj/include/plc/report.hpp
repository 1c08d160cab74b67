#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "plc/correction.hpp"
#include "plc/noise.hpp"
#include "plc/theory.hpp"

namespace plc {

nlohmann::json to_json(const NoiseReport& report);
nlohmann::json to_json(const RoundRecord& record);
nlohmann::json to_json(const MarginProfile& profile);
nlohmann::json to_json(const TheoremParams& params);
nlohmann::json to_json(const Lemma1Trace& trace);

RoundRecord round_record_from_json(const nlohmann::json& j);

/// rounds.csv: header `round,theta,T,flips,purity,train_acc,test_acc_bayes,
/// residual_margin`, one row per round, 9 significant digits.
void write_rounds_csv(const std::vector<RoundRecord>& rounds, const std::string& path);

void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

}  // namespace plc
