#include "plc/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "plc/errors.hpp"

namespace plc {

void write_dataset_csv(const WorkingDataset& dataset, const std::string& path) {
  dataset.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);

  const int d = static_cast<int>(dataset.features.cols);
  for (int j = 0; j < d; ++j) out << 'x' << j << ',';
  out << "y_clean,y_bayes,y_noisy,y_working\n";

  char buffer[64];
  for (std::int64_t i = 0; i < dataset.features.rows; ++i) {
    for (int j = 0; j < d; ++j) {
      std::snprintf(buffer, sizeof(buffer), "%.9g", dataset.features(i, j));
      out << buffer << ',';
    }
    const auto idx = static_cast<std::size_t>(i);
    out << dataset.clean_labels[idx] << ',' << dataset.bayes_labels[idx] << ','
        << dataset.noisy_labels[idx] << ',' << dataset.working_labels[idx] << '\n';
  }
  if (!out) throw IoError("failed writing: " + path);
}

WorkingDataset read_dataset_csv(const std::string& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV: " + path);

  // Count feature columns from the header.
  int d = 0;
  {
    std::stringstream header(line);
    std::string field;
    while (std::getline(header, field, ',')) {
      if (!field.empty() && field[0] == 'x') ++d;
    }
    if (d == 0) throw IoError("CSV header has no feature columns: " + path);
  }

  std::vector<double> features;
  WorkingDataset ds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    for (int j = 0; j < d; ++j) {
      if (!std::getline(row, field, ',')) throw IoError("short CSV row in " + path);
      features.push_back(std::stod(field));
    }
    int labels[4];
    for (int k = 0; k < 4; ++k) {
      if (!std::getline(row, field, ',')) throw IoError("short CSV row in " + path);
      labels[k] = std::stoi(field);
    }
    ds.clean_labels.push_back(labels[0]);
    ds.bayes_labels.push_back(labels[1]);
    ds.noisy_labels.push_back(labels[2]);
    ds.working_labels.push_back(labels[3]);
  }

  const auto n = static_cast<std::int64_t>(ds.clean_labels.size());
  ds.features = Matrix(n, d);
  std::copy(features.begin(), features.end(), ds.features.data.begin());

  if (num_classes > 0) {
    ds.num_classes = num_classes;
  } else {
    int max_label = 0;
    for (const auto* channel :
         {&ds.clean_labels, &ds.bayes_labels, &ds.noisy_labels, &ds.working_labels}) {
      for (int y : *channel) max_label = std::max(max_label, y);
    }
    ds.num_classes = max_label + 1;
  }
  ds.validate();
  return ds;
}

void write_mixture_json(const MixtureSpec& spec, const std::string& path) {
  nlohmann::json j;
  j["dimension"] = spec.dimension;
  j["num_classes"] = spec.num_classes;
  j["components"] = nlohmann::json::array();
  for (const auto& comp : spec.components) {
    j["components"].push_back({{"mean", comp.mean},
                               {"cov", comp.cov},
                               {"full_cov", comp.full_cov},
                               {"prior", comp.prior},
                               {"class", comp.class_id}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

MixtureSpec read_mixture_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad mixture JSON in " + path + ": " + e.what());
  }
  MixtureSpec spec;
  spec.dimension = j.at("dimension").get<int>();
  spec.num_classes = j.at("num_classes").get<int>();
  for (const auto& comp_json : j.at("components")) {
    GaussianComponent comp;
    comp.mean = comp_json.at("mean").get<std::vector<double>>();
    comp.cov = comp_json.at("cov").get<std::vector<double>>();
    comp.full_cov = comp_json.at("full_cov").get<bool>();
    comp.prior = comp_json.at("prior").get<double>();
    comp.class_id = comp_json.at("class").get<int>();
    spec.components.push_back(std::move(comp));
  }
  spec.validate();
  return spec;
}

}  // namespace plc
