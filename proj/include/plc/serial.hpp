#pragma once

#include "plc/datagen.hpp"
#include "plc/matrix.hpp"
#include "plc/model.hpp"

// Single-threaded reference implementations of the hot kernels, written
// independently of the parallel paths (direct density arithmetic, naive
// accumulation order). Used by the agreement tests and the benchmark tool.
namespace plc::serial {

/// Posterior by direct Bayes rule on raw (non-log) component densities.
/// Accurate for points within a moderate distance of the means; the oracle's
/// log-space path is the production implementation.
std::vector<double> posterior_direct(const MixtureSpec& spec, const double* x);

Matrix posterior_batch(const PosteriorOracle& oracle, const Matrix& features);

std::vector<double> margins(const PosteriorOracle& oracle, const Matrix& features);

/// Naive forward pass over a parameter snapshot extracted from the classifier.
Matrix predict_proba(const SoftmaxClassifier& classifier, const Matrix& features);

double mean_loss(const SoftmaxClassifier& classifier, const Matrix& features,
                 const std::vector<int>& labels);

}  // namespace plc::serial
