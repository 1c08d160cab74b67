#include "plc/serial.hpp"

#include <cmath>
#include <vector>

#include "plc/errors.hpp"

namespace plc::serial {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double component_density(const GaussianComponent& comp, const double* x, int d) {
  double quad = 0.0;
  double det = 1.0;
  if (comp.full_cov) {
    // Gaussian elimination on a copy; fine at reference-code scale.
    std::vector<double> a(comp.cov);
    std::vector<double> r(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) r[static_cast<std::size_t>(i)] = x[i] - comp.mean[static_cast<std::size_t>(i)];
    for (int col = 0; col < d; ++col) {
      const double pivot = a[static_cast<std::size_t>(col * d + col)];
      det *= pivot;
      for (int row = col + 1; row < d; ++row) {
        const double factor = a[static_cast<std::size_t>(row * d + col)] / pivot;
        for (int k = col; k < d; ++k)
          a[static_cast<std::size_t>(row * d + k)] -= factor * a[static_cast<std::size_t>(col * d + k)];
        r[static_cast<std::size_t>(row)] -= factor * r[static_cast<std::size_t>(col)];
      }
    }
    // Back substitution for Sigma^{-1} (x - mu).
    std::vector<double> sol(static_cast<std::size_t>(d));
    for (int row = d - 1; row >= 0; --row) {
      double acc = r[static_cast<std::size_t>(row)];
      for (int k = row + 1; k < d; ++k)
        acc -= a[static_cast<std::size_t>(row * d + k)] * sol[static_cast<std::size_t>(k)];
      sol[static_cast<std::size_t>(row)] = acc / a[static_cast<std::size_t>(row * d + row)];
    }
    for (int i = 0; i < d; ++i)
      quad += (x[i] - comp.mean[static_cast<std::size_t>(i)]) * sol[static_cast<std::size_t>(i)];
  } else {
    for (int i = 0; i < d; ++i) {
      const double diff = x[i] - comp.mean[static_cast<std::size_t>(i)];
      quad += diff * diff / comp.cov[static_cast<std::size_t>(i)];
      det *= comp.cov[static_cast<std::size_t>(i)];
    }
  }
  return std::exp(-0.5 * quad) / std::sqrt(std::pow(kTwoPi, d) * det);
}

}  // namespace

std::vector<double> posterior_direct(const MixtureSpec& spec, const double* x) {
  std::vector<double> joint(static_cast<std::size_t>(spec.num_classes), 0.0);
  for (const auto& comp : spec.components) {
    joint[static_cast<std::size_t>(comp.class_id)] +=
        comp.prior * component_density(comp, x, spec.dimension);
  }
  double total = 0.0;
  for (double v : joint) total += v;
  if (total <= 0.0) throw ValidationError("posterior_direct: densities underflowed");
  for (double& v : joint) v /= total;
  return joint;
}

Matrix posterior_batch(const PosteriorOracle& oracle, const Matrix& features) {
  Matrix out(features.rows, oracle.num_classes());
  for (std::int64_t i = 0; i < features.rows; ++i) {
    oracle.posterior(features.row(i), out.row(i));
  }
  return out;
}

std::vector<double> margins(const PosteriorOracle& oracle, const Matrix& features) {
  std::vector<double> out(static_cast<std::size_t>(features.rows));
  for (std::int64_t i = 0; i < features.rows; ++i) {
    out[static_cast<std::size_t>(i)] = oracle.margin(features.row(i));
  }
  return out;
}

Matrix predict_proba(const SoftmaxClassifier& classifier, const Matrix& features) {
  const Architecture& arch = classifier.arch();
  // Snapshot the flat parameter vector into per-layer tensors.
  std::vector<int> widths;
  widths.push_back(arch.input);
  widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
  widths.push_back(arch.output);

  struct LayerSnapshot {
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> biases;
  };
  std::vector<LayerSnapshot> layers(widths.size() - 1);
  std::size_t cursor = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto in = static_cast<std::size_t>(widths[l]);
    const auto out = static_cast<std::size_t>(widths[l + 1]);
    layers[l].weights.resize(in * out);
    layers[l].biases.resize(out);
    for (auto& w : layers[l].weights) w = classifier.get_parameter(cursor++);
    for (auto& b : layers[l].biases) b = classifier.get_parameter(cursor++);
  }

  Matrix probs(features.rows, arch.output);
  std::vector<double> cur, next;
  for (std::int64_t i = 0; i < features.rows; ++i) {
    cur.assign(features.row(i), features.row(i) + arch.input);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto in = cur.size();
      const auto out = layers[l].biases.size();
      const bool last = l + 1 == layers.size();
      next.assign(out, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        double z = layers[l].biases[o];
        for (std::size_t j = 0; j < in; ++j) z += layers[l].weights[o * in + j] * cur[j];
        if (!last) {
          z = arch.activation == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
        }
        next[o] = z;
      }
      cur.swap(next);
    }
    double max_logit = cur[0];
    for (double z : cur) max_logit = std::max(max_logit, z);
    double sum = 0.0;
    for (std::size_t c = 0; c < cur.size(); ++c) {
      probs(i, static_cast<std::int64_t>(c)) = std::exp(cur[c] - max_logit);
      sum += probs(i, static_cast<std::int64_t>(c));
    }
    for (std::size_t c = 0; c < cur.size(); ++c) probs(i, static_cast<std::int64_t>(c)) /= sum;
  }
  return probs;
}

double mean_loss(const SoftmaxClassifier& classifier, const Matrix& features,
                 const std::vector<int>& labels) {
  const Matrix probs = predict_proba(classifier, features);
  double total = 0.0;
  for (std::int64_t i = 0; i < features.rows; ++i) {
    total += -std::log(std::max(probs(i, labels[static_cast<std::size_t>(i)]), 1e-300));
  }
  return total / static_cast<double>(features.rows);
}

}  // namespace plc::serial
