#pragma once

#include <string>

#include "plc/datagen.hpp"

namespace plc {

/// CSV schema: header `x0,...,x{d-1},y_clean,y_bayes,y_noisy,y_working`, one
/// row per sample, features printed with 9 significant digits, labels as
/// base-10 integers.
void write_dataset_csv(const WorkingDataset& dataset, const std::string& path);

/// Reads the schema above. When num_classes is 0 the class count is inferred
/// as max(label) + 1.
WorkingDataset read_dataset_csv(const std::string& path, int num_classes = 0);

/// Mixture-spec sidecar (the oracle description) as JSON.
void write_mixture_json(const MixtureSpec& spec, const std::string& path);
MixtureSpec read_mixture_json(const std::string& path);

}  // namespace plc
