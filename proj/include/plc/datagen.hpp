#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "plc/matrix.hpp"

namespace plc {

/// One Gaussian mixture component. `cov` holds either per-dimension variances
/// (size d) or a full SPD covariance matrix in row-major order (size d*d,
/// full_cov = true).
struct GaussianComponent {
  std::vector<double> mean;
  std::vector<double> cov;
  bool full_cov = false;
  double prior = 0.0;
  int class_id = 0;
};

struct MixtureSpec {
  std::vector<GaussianComponent> components;
  int dimension = 0;
  int num_classes = 0;

  /// Throws ValidationError on: priors not summing to 1 within 1e-12,
  /// class ids outside [0, C), a class with no component, non-positive
  /// covariance, or inconsistent dimensions.
  void validate() const;
};

/// The spec's 2-D two-blob demo: unit isotropic components at (-1,0) and
/// (1,0), equal priors.
MixtureSpec default_blob_spec();

/// Exact class-posterior oracle for a Gaussian mixture. Immutable after
/// construction and safe to share across threads.
class PosteriorOracle {
 public:
  explicit PosteriorOracle(MixtureSpec spec);

  int dimension() const { return spec_.dimension; }
  int num_classes() const { return spec_.num_classes; }
  const MixtureSpec& spec() const { return spec_; }

  /// eta(x): length-C probability vector, computed from log densities with
  /// max-subtraction so it stays a simplex arbitrarily far from the means.
  void posterior(const double* x, double* out) const;
  std::vector<double> posterior(std::span<const double> x) const;

  /// Row-wise posterior over an n x d feature matrix (parallel over rows).
  Matrix posterior_batch(const Matrix& features) const;

  /// Binary margin t(x) = |eta_1(x) - 1/2|. Requires C == 2.
  double margin(const double* x) const;
  std::vector<double> margins(const Matrix& features) const;

  int bayes_label(const double* x) const;

  /// Log density of component k at x (including prior), used for sampling
  /// diagnostics and tests.
  double component_log_joint(std::size_t k, const double* x) const;

  /// Lower Cholesky factor of component k's covariance (for diagonal
  /// components, the per-dimension standard deviations).
  std::span<const double> component_cholesky(std::size_t k) const;

 private:
  struct PreparedComponent {
    std::vector<double> chol;  // diag: sqrt variances; full: lower Cholesky factor
    double log_norm = 0.0;     // -1/2 (d log 2pi + log det)
    double log_prior = 0.0;
    bool full = false;
  };

  MixtureSpec spec_;
  std::vector<PreparedComponent> prepared_;
};

/// Features with the four label channels the pipeline tracks.
struct WorkingDataset {
  Matrix features;
  std::vector<int> clean_labels;
  std::vector<int> bayes_labels;
  std::vector<int> noisy_labels;    // y-tilde^0, set by the corruption step
  std::vector<int> working_labels;  // y-tilde^t, mutated by label correction
  int num_classes = 0;
  std::string split;  // "train" or "test"

  std::int64_t size() const { return features.rows; }
  void validate() const;
};

/// Samples features from the mixture, draws clean labels from eta, and fills
/// the Bayes channel; noisy/working start equal to the clean labels until a
/// corruption step runs. Bit-identical output for a fixed seed.
std::tuple<WorkingDataset, WorkingDataset, PosteriorOracle> make_gaussian_mixture(
    const MixtureSpec& spec, std::int64_t n_train, std::int64_t n_test, std::uint64_t seed);

/// One label per row, drawn independently from the categorical eta(x_i).
std::vector<int> sample_clean_labels(const PosteriorOracle& oracle, const Matrix& features,
                                     std::uint64_t seed);

/// Bayes-optimal labels: argmax of eta per row (binary ties resolve to 1).
std::vector<int> bayes_labels(const PosteriorOracle& oracle, const Matrix& features);

}  // namespace plc
