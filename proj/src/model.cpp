#include "plc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "plc/errors.hpp"
#include "plc/parallel.hpp"
#include "plc/rng.hpp"

namespace plc {
namespace {

constexpr char kMagic[4] = {'P', 'L', 'C', 'M'};
constexpr std::uint32_t kCheckpointVersion = 1;

// Samples per gradient-accumulation chunk; partial gradients are combined in
// chunk order so results do not depend on the thread count.
constexpr std::int64_t kGradChunk = 16;

double activate(Activation act, double z) {
  return act == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double activate_derivative(Activation act, double a) {
  return act == Activation::Relu ? (a > 0.0 ? 1.0 : 0.0) : 1.0 - a * a;
}

}  // namespace

void Architecture::validate() const {
  if (input < 1) throw ValidationError("architecture input width must be >= 1");
  if (output < 1) throw ValidationError("architecture output width must be >= 1");
  for (int h : hidden) {
    if (h < 1) throw ValidationError("hidden widths must be >= 1");
  }
}

SoftmaxClassifier::SoftmaxClassifier(Architecture arch, std::uint64_t seed)
    : arch_(std::move(arch)), init_seed_(seed) {
  arch_.validate();
  std::vector<int> widths;
  widths.push_back(arch_.input);
  widths.insert(widths.end(), arch_.hidden.begin(), arch_.hidden.end());
  widths.push_back(arch_.output);

  layers_.resize(widths.size() - 1);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double scale = std::sqrt(1.0 / fan_in);
    rng::Stream gen(seed, l);
    layers_[l].weights = Matrix(fan_out, fan_in);
    for (double& w : layers_[l].weights.data) w = (2.0 * gen.next_double() - 1.0) * scale;
    layers_[l].biases.assign(static_cast<std::size_t>(fan_out), 0.0);
  }
}

void SoftmaxClassifier::forward_row(const double* x, double* probs,
                                    std::vector<double>& scratch) const {
  // scratch ping-pongs activations between layers.
  int max_width = arch_.input;
  for (int h : arch_.hidden) max_width = std::max(max_width, h);
  max_width = std::max(max_width, arch_.output);
  scratch.resize(2 * static_cast<std::size_t>(max_width));
  double* cur = scratch.data();
  double* next = scratch.data() + max_width;

  std::copy(x, x + arch_.input, cur);
  int cur_width = arch_.input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const bool last = l + 1 == layers_.size();
    const auto out_width = layer.weights.rows;
    for (std::int64_t o = 0; o < out_width; ++o) {
      const double* w = layer.weights.row(o);
      double z = layer.biases[static_cast<std::size_t>(o)];
      for (int i = 0; i < cur_width; ++i) z += w[i] * cur[i];
      next[o] = last ? z : activate(arch_.activation, z);
    }
    std::swap(cur, next);
    cur_width = static_cast<int>(out_width);
  }

  // Max-subtracted softmax over the logits.
  double max_logit = cur[0];
  for (int c = 1; c < arch_.output; ++c) max_logit = std::max(max_logit, cur[c]);
  double sum = 0.0;
  for (int c = 0; c < arch_.output; ++c) {
    probs[c] = std::exp(cur[c] - max_logit);
    sum += probs[c];
  }
  for (int c = 0; c < arch_.output; ++c) probs[c] /= sum;
}

Matrix SoftmaxClassifier::predict_proba(const Matrix& features) const {
  if (features.cols != arch_.input)
    throw ValidationError("predict_proba: feature dimension mismatch");
  Matrix probs(features.rows, arch_.output);
  par::for_each_index(features.rows, [&](std::int64_t i) {
    std::vector<double> scratch;
    forward_row(features.row(i), probs.row(i), scratch);
  });
  return probs;
}

std::vector<int> SoftmaxClassifier::predict_labels(const Matrix& features) const {
  const Matrix probs = predict_proba(features);
  std::vector<int> labels(static_cast<std::size_t>(features.rows));
  for (std::int64_t i = 0; i < features.rows; ++i) {
    labels[static_cast<std::size_t>(i)] = argmax_label(probs.row(i), arch_.output);
  }
  return labels;
}

std::size_t SoftmaxClassifier::parameter_count() const {
  std::size_t count = 0;
  for (const Layer& layer : layers_) {
    count += layer.weights.data.size() + layer.biases.size();
  }
  return count;
}

double SoftmaxClassifier::get_parameter(std::size_t index) const {
  for (const Layer& layer : layers_) {
    if (index < layer.weights.data.size()) return layer.weights.data[index];
    index -= layer.weights.data.size();
    if (index < layer.biases.size()) return layer.biases[index];
    index -= layer.biases.size();
  }
  throw ValidationError("parameter index out of range");
}

void SoftmaxClassifier::set_parameter(std::size_t index, double value) {
  for (Layer& layer : layers_) {
    if (index < layer.weights.data.size()) {
      layer.weights.data[index] = value;
      return;
    }
    index -= layer.weights.data.size();
    if (index < layer.biases.size()) {
      layer.biases[index] = value;
      return;
    }
    index -= layer.biases.size();
  }
  throw ValidationError("parameter index out of range");
}

namespace {

/// Workspace for one sample's forward/backward pass.
struct BackpropWorkspace {
  std::vector<std::vector<double>> activations;  // per layer output (last: logits)
  std::vector<double> delta;
  std::vector<double> delta_prev;
};

}  // namespace

double SoftmaxClassifier::batch_gradient(const Matrix& features, const std::vector<int>& labels,
                                         std::vector<double>& grad_out) const {
  const std::int64_t n = features.rows;
  if (n == 0) throw ValidationError("batch_gradient: empty batch");
  if (features.cols != arch_.input)
    throw ValidationError("batch_gradient: feature dimension mismatch");
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw ValidationError("batch_gradient: label count mismatch");

  const std::size_t pcount = parameter_count();
  const std::int64_t nchunks = (n + kGradChunk - 1) / kGradChunk;
  std::vector<std::vector<double>> chunk_grad(static_cast<std::size_t>(nchunks));
  std::vector<double> chunk_loss(static_cast<std::size_t>(nchunks), 0.0);

  par::for_each_index(nchunks, [&](std::int64_t c) {
    std::vector<double>& grad = chunk_grad[static_cast<std::size_t>(c)];
    grad.assign(pcount, 0.0);
    BackpropWorkspace ws;
    ws.activations.resize(layers_.size());
    double loss = 0.0;

    const std::int64_t lo = c * kGradChunk;
    const std::int64_t hi = std::min(lo + kGradChunk, n);
    for (std::int64_t i = lo; i < hi; ++i) {
      const double* x = features.row(i);
      const int y = labels[static_cast<std::size_t>(i)];

      // Forward, storing activations per layer.
      const double* prev = x;
      int prev_width = arch_.input;
      for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const bool last = l + 1 == layers_.size();
        auto& out = ws.activations[l];
        out.resize(static_cast<std::size_t>(layer.weights.rows));
        for (std::int64_t o = 0; o < layer.weights.rows; ++o) {
          const double* w = layer.weights.row(o);
          double z = layer.biases[static_cast<std::size_t>(o)];
          for (int j = 0; j < prev_width; ++j) z += w[j] * prev[j];
          out[static_cast<std::size_t>(o)] = last ? z : activate(arch_.activation, z);
        }
        prev = out.data();
        prev_width = static_cast<int>(layer.weights.rows);
      }

      // Stable cross-entropy from the logits.
      const auto& logits = ws.activations.back();
      double max_logit = logits[0];
      for (double z : logits) max_logit = std::max(max_logit, z);
      double sumexp = 0.0;
      for (double z : logits) sumexp += std::exp(z - max_logit);
      loss += std::log(sumexp) + max_logit - logits[static_cast<std::size_t>(y)];

      // delta at the output: softmax(z) - onehot(y).
      ws.delta.resize(logits.size());
      for (std::size_t k = 0; k < logits.size(); ++k) {
        ws.delta[k] = std::exp(logits[k] - max_logit) / sumexp;
      }
      ws.delta[static_cast<std::size_t>(y)] -= 1.0;

      // Backward through the layers, accumulating into the flat buffer.
      std::size_t layer_offset_end = pcount;
      for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        const std::size_t wsize = layer.weights.data.size();
        const std::size_t bsize = layer.biases.size();
        const std::size_t offset = layer_offset_end - wsize - bsize;
        const double* below = l == 0 ? x : ws.activations[l - 1].data();
        const auto in_width = layer.weights.cols;

        double* gw = grad.data() + offset;
        double* gb = grad.data() + offset + wsize;
        for (std::int64_t o = 0; o < layer.weights.rows; ++o) {
          const double d = ws.delta[static_cast<std::size_t>(o)];
          double* gw_row = gw + o * in_width;
          for (std::int64_t j = 0; j < in_width; ++j) gw_row[j] += d * below[j];
          gb[o] += d;
        }

        if (l > 0) {
          ws.delta_prev.assign(static_cast<std::size_t>(in_width), 0.0);
          for (std::int64_t o = 0; o < layer.weights.rows; ++o) {
            const double d = ws.delta[static_cast<std::size_t>(o)];
            const double* w = layer.weights.row(o);
            for (std::int64_t j = 0; j < in_width; ++j) ws.delta_prev[static_cast<std::size_t>(j)] += d * w[j];
          }
          for (std::int64_t j = 0; j < in_width; ++j) {
            ws.delta_prev[static_cast<std::size_t>(j)] *=
                activate_derivative(arch_.activation, ws.activations[l - 1][static_cast<std::size_t>(j)]);
          }
          std::swap(ws.delta, ws.delta_prev);
        }
        layer_offset_end = offset;
      }
    }
    chunk_loss[static_cast<std::size_t>(c)] = loss;
  });

  grad_out.assign(pcount, 0.0);
  double total_loss = 0.0;
  for (std::int64_t c = 0; c < nchunks; ++c) {
    const auto& grad = chunk_grad[static_cast<std::size_t>(c)];
    for (std::size_t k = 0; k < pcount; ++k) grad_out[k] += grad[k];
    total_loss += chunk_loss[static_cast<std::size_t>(c)];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& g : grad_out) g *= inv_n;
  return total_loss * inv_n;
}

double SoftmaxClassifier::mean_loss(const Matrix& features, const std::vector<int>& labels) const {
  if (features.rows != static_cast<std::int64_t>(labels.size()))
    throw ValidationError("mean_loss: label count mismatch");
  const Matrix probs = predict_proba(features);
  const double total = par::sum_indexed(features.rows, [&](std::int64_t i) {
    const double p = probs(i, labels[static_cast<std::size_t>(i)]);
    return -std::log(std::max(p, 1e-300));
  });
  return total / static_cast<double>(features.rows);
}

double SoftmaxClassifier::accuracy(const Matrix& features, const std::vector<int>& labels) const {
  if (features.rows != static_cast<std::int64_t>(labels.size()))
    throw ValidationError("accuracy: label count mismatch");
  const std::vector<int> predicted = predict_labels(features);
  const std::int64_t hits = par::count_indexed(features.rows, [&](std::int64_t i) {
    return predicted[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)];
  });
  return static_cast<double>(hits) / static_cast<double>(features.rows);
}

TrainTrace SoftmaxClassifier::train(const Matrix& features, const std::vector<int>& labels,
                                    int epochs, std::uint64_t seed, const TrainConfig& config) {
  const std::int64_t n = features.rows;
  if (n == 0) throw ValidationError("train: empty dataset");
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw ValidationError("train: label count mismatch");
  for (int y : labels) {
    if (y < 0 || y >= arch_.output) throw ValidationError("train: label outside [0, C)");
  }
  if (config.batch_size < 1) throw ValidationError("train: batch size must be >= 1");
  if (epochs < 0) throw ValidationError("train: negative epoch count");

  TrainTrace trace;
  const int batch = std::min<std::int64_t>(config.batch_size, n);
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), std::int64_t{0});
  Matrix batch_features(batch, arch_.input);
  std::vector<int> batch_labels(static_cast<std::size_t>(batch));
  std::vector<double> grad;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng::Stream shuffler(seed, static_cast<std::uint64_t>(epoch));
    shuffler.shuffle(perm);

    double epoch_loss = 0.0;
    for (std::int64_t start = 0; start < n; start += batch) {
      const std::int64_t count = std::min<std::int64_t>(batch, n - start);
      batch_features.rows = count;
      batch_labels.resize(static_cast<std::size_t>(count));
      for (std::int64_t b = 0; b < count; ++b) {
        const std::int64_t src = perm[static_cast<std::size_t>(start + b)];
        std::copy(features.row(src), features.row(src) + arch_.input, batch_features.row(b));
        batch_labels[static_cast<std::size_t>(b)] = labels[static_cast<std::size_t>(src)];
      }

      const double loss = batch_gradient(batch_features, batch_labels, grad);
      if (!std::isfinite(loss)) throw TrainingDivergedError(epoch + 1);
      epoch_loss += loss * static_cast<double>(count);

      std::size_t index = 0;
      for (Layer& layer : layers_) {
        for (double& w : layer.weights.data) w -= config.learning_rate * grad[index++];
        for (double& b : layer.biases) b -= config.learning_rate * grad[index++];
      }
    }
    trace.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
    trace.epoch_accuracy.push_back(accuracy(features, labels));
  }
  return trace;
}

double gradient_check(const SoftmaxClassifier& classifier, const Matrix& features,
                      const std::vector<int>& labels, double step, std::uint64_t seed) {
  if (!(step >= 1e-7 && step <= 1e-3))
    throw ValidationError("gradient_check: step must lie in [1e-7, 1e-3]");
  if (features.rows == 0) throw ValidationError("gradient_check: empty batch");

  std::vector<double> analytic;
  SoftmaxClassifier probe = classifier;
  probe.batch_gradient(features, labels, analytic);

  const std::size_t pcount = probe.parameter_count();
  std::vector<std::size_t> indices(pcount);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  if (pcount > 200) {
    rng::Stream gen(seed);
    gen.shuffle(indices);
    indices.resize(200);
  }

  double max_rel_err = 0.0;
  for (std::size_t index : indices) {
    const double original = probe.get_parameter(index);
    probe.set_parameter(index, original + step);
    const double loss_plus = probe.mean_loss(features, labels);
    probe.set_parameter(index, original - step);
    const double loss_minus = probe.mean_loss(features, labels);
    probe.set_parameter(index, original);

    const double numeric = (loss_plus - loss_minus) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[index]), std::abs(numeric), 1e-8});
    max_rel_err = std::max(max_rel_err, std::abs(analytic[index] - numeric) / denom);
  }
  return max_rel_err;
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
}

}  // namespace

void SoftmaxClassifier::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  write_raw(out, kCheckpointVersion);
  write_raw(out, static_cast<std::uint32_t>(sizeof(double) * 8));
  write_raw(out, init_seed_);
  write_raw(out, static_cast<std::uint8_t>(arch_.activation == Activation::Relu ? 0 : 1));
  write_raw(out, static_cast<std::uint32_t>(arch_.input));
  write_raw(out, static_cast<std::uint32_t>(arch_.hidden.size()));
  for (int h : arch_.hidden) write_raw(out, static_cast<std::uint32_t>(h));
  write_raw(out, static_cast<std::uint32_t>(arch_.output));
  for (const Layer& layer : layers_) {
    out.write(reinterpret_cast<const char*>(layer.weights.data.data()),
              static_cast<std::streamsize>(layer.weights.data.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(layer.biases.data()),
              static_cast<std::streamsize>(layer.biases.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

SoftmaxClassifier SoftmaxClassifier::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a classifier checkpoint: " + path);
  std::uint32_t version = 0, precision = 0;
  read_raw(in, version);
  read_raw(in, precision);
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version");
  if (precision != sizeof(double) * 8) throw IoError("unsupported checkpoint precision");

  std::uint64_t seed = 0;
  std::uint8_t act = 0;
  std::uint32_t input = 0, n_hidden = 0, output = 0;
  read_raw(in, seed);
  read_raw(in, act);
  read_raw(in, input);
  read_raw(in, n_hidden);
  Architecture arch;
  arch.input = static_cast<int>(input);
  arch.activation = act == 0 ? Activation::Relu : Activation::Tanh;
  for (std::uint32_t i = 0; i < n_hidden; ++i) {
    std::uint32_t h = 0;
    read_raw(in, h);
    arch.hidden.push_back(static_cast<int>(h));
  }
  read_raw(in, output);
  arch.output = static_cast<int>(output);
  if (!in) throw IoError("truncated checkpoint header: " + path);

  SoftmaxClassifier model(arch, seed);
  for (Layer& layer : model.layers_) {
    in.read(reinterpret_cast<char*>(layer.weights.data.data()),
            static_cast<std::streamsize>(layer.weights.data.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(layer.biases.data()),
            static_cast<std::streamsize>(layer.biases.size() * sizeof(double)));
  }
  if (!in) throw IoError("truncated checkpoint tensors: " + path);
  return model;
}

}  // namespace plc
