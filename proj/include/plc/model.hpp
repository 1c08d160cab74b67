#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plc/matrix.hpp"

namespace plc {

enum class Activation { Relu, Tanh };

struct Architecture {
  int input = 0;
  std::vector<int> hidden;
  int output = 0;
  Activation activation = Activation::Relu;

  void validate() const;
  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
};

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 128;
};

struct TrainTrace {
  std::vector<double> epoch_loss;      // mean cross-entropy over the epoch
  std::vector<double> epoch_accuracy;  // vs the labels trained on, after the epoch
};

/// Feed-forward softmax classifier in double precision, trained by plain
/// mini-batch SGD on cross-entropy. Prediction on a const instance is
/// thread-safe; train() mutates parameters and owns the instance.
class SoftmaxClassifier {
 public:
  SoftmaxClassifier(Architecture arch, std::uint64_t seed);

  const Architecture& arch() const { return arch_; }
  std::uint64_t init_seed() const { return init_seed_; }

  /// Row-wise softmax probabilities (max-subtracted), parallel over rows.
  Matrix predict_proba(const Matrix& features) const;

  /// Argmax labels (binary ties resolve to class 1).
  std::vector<int> predict_labels(const Matrix& features) const;

  /// Runs `epochs` epochs of mini-batch SGD, continuing from the current
  /// parameters. Batches are reshuffled each epoch from `seed`. Throws
  /// TrainingDivergedError naming the epoch if the loss goes non-finite.
  TrainTrace train(const Matrix& features, const std::vector<int>& labels, int epochs,
                   std::uint64_t seed, const TrainConfig& config);

  /// Mean cross-entropy of the current parameters on (features, labels).
  double mean_loss(const Matrix& features, const std::vector<int>& labels) const;

  double accuracy(const Matrix& features, const std::vector<int>& labels) const;

  // Flat parameter access (layer weights row-major, then biases, per layer).
  std::size_t parameter_count() const;
  double get_parameter(std::size_t index) const;
  void set_parameter(std::size_t index, double value);

  /// Mean cross-entropy gradient over a batch, flattened like the parameter
  /// vector. Returns the batch mean loss.
  double batch_gradient(const Matrix& features, const std::vector<int>& labels,
                        std::vector<double>& grad_out) const;

  /// Binary checkpoint (versioned header + row-major tensors); round-trips
  /// bit-exactly. Layout documented in the README.
  void save(const std::string& path) const;
  static SoftmaxClassifier load(const std::string& path);

 private:
  struct Layer {
    Matrix weights;  // out x in
    std::vector<double> biases;
  };

  void forward_row(const double* x, double* probs, std::vector<double>& scratch) const;
  friend struct ModelKernels;

  Architecture arch_;
  std::vector<Layer> layers_;
  std::uint64_t init_seed_ = 0;
};

/// Max relative error between analytic and central-difference gradients over
/// a random subset of at least 200 parameters (all parameters when fewer).
/// Denominator is max(|analytic|, |numeric|, 1e-8).
double gradient_check(const SoftmaxClassifier& classifier, const Matrix& features,
                      const std::vector<int>& labels, double step, std::uint64_t seed);

}  // namespace plc
