#include "plc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "plc/parallel.hpp"
#include "plc/rng.hpp"

namespace plc {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Stream ids for the sub-generators of make_gaussian_mixture.
enum : std::uint64_t {
  kStreamTrainFeatures = 1,
  kStreamTestFeatures = 2,
  kStreamTrainLabels = 3,
  kStreamTestLabels = 4,
};

/// In-place Cholesky factorization of a d x d SPD matrix (lower factor).
/// Throws if the matrix is not positive definite.
void cholesky(std::vector<double>& a, int d) {
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = a[static_cast<std::size_t>(i * d + j)];
      for (int k = 0; k < j; ++k) {
        sum -= a[static_cast<std::size_t>(i * d + k)] * a[static_cast<std::size_t>(j * d + k)];
      }
      if (i == j) {
        if (sum <= 0.0) throw ValidationError("covariance matrix is not positive definite");
        a[static_cast<std::size_t>(i * d + j)] = std::sqrt(sum);
      } else {
        a[static_cast<std::size_t>(i * d + j)] = sum / a[static_cast<std::size_t>(j * d + j)];
      }
    }
    for (int j = i + 1; j < d; ++j) a[static_cast<std::size_t>(i * d + j)] = 0.0;
  }
}

}  // namespace

void MixtureSpec::validate() const {
  if (dimension <= 0) throw ValidationError("mixture dimension must be positive");
  if (num_classes <= 0) throw ValidationError("num_classes must be positive");
  if (components.empty()) throw ValidationError("mixture needs at least one component");

  double prior_sum = 0.0;
  std::vector<bool> class_seen(static_cast<std::size_t>(num_classes), false);
  for (const auto& comp : components) {
    if (static_cast<int>(comp.mean.size()) != dimension)
      throw ValidationError("component mean dimension mismatch");
    if (comp.class_id < 0 || comp.class_id >= num_classes)
      throw ValidationError("component class_id outside [0, C)");
    if (comp.prior < 0.0) throw ValidationError("component prior must be non-negative");
    if (comp.full_cov) {
      if (static_cast<int>(comp.cov.size()) != dimension * dimension)
        throw ValidationError("full covariance must be d x d");
    } else {
      if (static_cast<int>(comp.cov.size()) != dimension)
        throw ValidationError("diagonal covariance must have d entries");
      for (double v : comp.cov) {
        if (!(v > 0.0)) throw ValidationError("covariance scales must be strictly positive");
      }
    }
    prior_sum += comp.prior;
    class_seen[static_cast<std::size_t>(comp.class_id)] = true;
  }
  if (std::abs(prior_sum - 1.0) > 1e-12)
    throw ValidationError("component priors must sum to 1 within 1e-12");
  for (int c = 0; c < num_classes; ++c) {
    if (!class_seen[static_cast<std::size_t>(c)])
      throw ValidationError("class " + std::to_string(c) + " has no component");
  }
}

MixtureSpec default_blob_spec() {
  MixtureSpec spec;
  spec.dimension = 2;
  spec.num_classes = 2;
  spec.components = {
      {{-1.0, 0.0}, {1.0, 1.0}, false, 0.5, 0},
      {{1.0, 0.0}, {1.0, 1.0}, false, 0.5, 1},
  };
  return spec;
}

PosteriorOracle::PosteriorOracle(MixtureSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const int d = spec_.dimension;
  prepared_.reserve(spec_.components.size());
  for (const auto& comp : spec_.components) {
    PreparedComponent prep;
    prep.full = comp.full_cov;
    prep.log_prior = comp.prior > 0.0 ? std::log(comp.prior)
                                      : -std::numeric_limits<double>::infinity();
    double log_det = 0.0;
    if (comp.full_cov) {
      prep.chol = comp.cov;
      cholesky(prep.chol, d);
      for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(prep.chol[static_cast<std::size_t>(i * d + i)]);
    } else {
      prep.chol.resize(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) {
        prep.chol[static_cast<std::size_t>(i)] = std::sqrt(comp.cov[static_cast<std::size_t>(i)]);
        log_det += std::log(comp.cov[static_cast<std::size_t>(i)]);
      }
    }
    prep.log_norm = -0.5 * (d * kLog2Pi + log_det);
    prepared_.push_back(std::move(prep));
  }
}

double PosteriorOracle::component_log_joint(std::size_t k, const double* x) const {
  const int d = spec_.dimension;
  const auto& comp = spec_.components[k];
  const auto& prep = prepared_[k];
  double quad = 0.0;
  if (prep.full) {
    // Solve L z = (x - mu) by forward substitution; quad = |z|^2.
    double z[64];
    std::vector<double> zbuf;
    double* zp = z;
    if (d > 64) {
      zbuf.resize(static_cast<std::size_t>(d));
      zp = zbuf.data();
    }
    for (int i = 0; i < d; ++i) {
      double sum = x[i] - comp.mean[static_cast<std::size_t>(i)];
      for (int j = 0; j < i; ++j) sum -= prep.chol[static_cast<std::size_t>(i * d + j)] * zp[j];
      zp[i] = sum / prep.chol[static_cast<std::size_t>(i * d + i)];
      quad += zp[i] * zp[i];
    }
  } else {
    for (int i = 0; i < d; ++i) {
      const double r = (x[i] - comp.mean[static_cast<std::size_t>(i)]) / prep.chol[static_cast<std::size_t>(i)];
      quad += r * r;
    }
  }
  return prep.log_prior + prep.log_norm - 0.5 * quad;
}

void PosteriorOracle::posterior(const double* x, double* out) const {
  const int C = spec_.num_classes;
  // Per-class log joints via log-sum-exp over that class's components.
  double stack[16];
  std::vector<double> heap;
  double* class_log = stack;
  if (C > 16) {
    heap.resize(static_cast<std::size_t>(C));
    class_log = heap.data();
  }
  for (int c = 0; c < C; ++c) class_log[c] = -std::numeric_limits<double>::infinity();

  for (std::size_t k = 0; k < spec_.components.size(); ++k) {
    const int c = spec_.components[k].class_id;
    const double lj = component_log_joint(k, x);
    // log-sum-exp accumulate
    double& acc = class_log[c];
    if (lj > acc) {
      acc = std::isinf(acc) ? lj : lj + std::log1p(std::exp(acc - lj));
    } else if (!std::isinf(lj)) {
      acc = acc + std::log1p(std::exp(lj - acc));
    }
  }

  double max_log = class_log[0];
  for (int c = 1; c < C; ++c) max_log = std::max(max_log, class_log[c]);
  double sum = 0.0;
  for (int c = 0; c < C; ++c) {
    out[c] = std::exp(class_log[c] - max_log);
    sum += out[c];
  }
  for (int c = 0; c < C; ++c) out[c] /= sum;
}

std::vector<double> PosteriorOracle::posterior(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != spec_.dimension)
    throw ValidationError("posterior_eval: feature dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(spec_.num_classes));
  posterior(x.data(), out.data());
  return out;
}

Matrix PosteriorOracle::posterior_batch(const Matrix& features) const {
  if (features.cols != spec_.dimension)
    throw ValidationError("posterior_batch: feature dimension mismatch");
  Matrix out(features.rows, spec_.num_classes);
  par::for_each_index(features.rows, [&](std::int64_t i) {
    posterior(features.row(i), out.row(i));
  });
  return out;
}

double PosteriorOracle::margin(const double* x) const {
  if (spec_.num_classes != 2) throw ValidationError("margin is defined for binary oracles only");
  double p[2];
  posterior(x, p);
  return std::abs(p[1] - 0.5);
}

std::vector<double> PosteriorOracle::margins(const Matrix& features) const {
  if (spec_.num_classes != 2) throw ValidationError("margins are defined for binary oracles only");
  if (features.cols != spec_.dimension)
    throw ValidationError("margins: feature dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(features.rows));
  par::for_each_index(features.rows, [&](std::int64_t i) {
    out[static_cast<std::size_t>(i)] = margin(features.row(i));
  });
  return out;
}

std::span<const double> PosteriorOracle::component_cholesky(std::size_t k) const {
  return prepared_[k].chol;
}

int PosteriorOracle::bayes_label(const double* x) const {
  const int C = spec_.num_classes;
  double stack[16];
  std::vector<double> heap;
  double* p = stack;
  if (C > 16) {
    heap.resize(static_cast<std::size_t>(C));
    p = heap.data();
  }
  posterior(x, p);
  return argmax_label(p, C);
}

void WorkingDataset::validate() const {
  const auto n = static_cast<std::size_t>(features.rows);
  if (clean_labels.size() != n || bayes_labels.size() != n || noisy_labels.size() != n ||
      working_labels.size() != n) {
    throw ValidationError("label channels must all have length n");
  }
  if (num_classes < 1) throw ValidationError("dataset num_classes must be positive");
  auto in_range = [&](const std::vector<int>& v) {
    return std::all_of(v.begin(), v.end(),
                       [&](int y) { return y >= 0 && y < num_classes; });
  };
  if (!in_range(clean_labels) || !in_range(bayes_labels) || !in_range(noisy_labels) ||
      !in_range(working_labels)) {
    throw ValidationError("labels outside [0, C)");
  }
}

namespace {

Matrix sample_features(const MixtureSpec& spec, const PosteriorOracle& oracle,
                       std::int64_t n, std::uint64_t stream_seed) {
  const int d = spec.dimension;
  std::vector<double> priors(spec.components.size());
  for (std::size_t k = 0; k < spec.components.size(); ++k) priors[k] = spec.components[k].prior;

  Matrix features(n, d);
  par::for_each_index(n, [&](std::int64_t i) {
    auto gen = rng::at(stream_seed, static_cast<std::uint64_t>(i));
    const int k = gen.next_categorical(priors);
    const auto& comp = spec.components[static_cast<std::size_t>(k)];
    double* x = features.row(i);
    if (comp.full_cov) {
      // x = mu + L z, reusing the oracle's Cholesky factor.
      const auto chol = oracle.component_cholesky(static_cast<std::size_t>(k));
      std::vector<double> z(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) z[static_cast<std::size_t>(j)] = gen.next_gaussian();
      for (int r = 0; r < d; ++r) {
        double acc = comp.mean[static_cast<std::size_t>(r)];
        for (int c2 = 0; c2 <= r; ++c2) {
          acc += chol[static_cast<std::size_t>(r * d + c2)] * z[static_cast<std::size_t>(c2)];
        }
        x[r] = acc;
      }
    } else {
      for (int j = 0; j < d; ++j) {
        x[j] = comp.mean[static_cast<std::size_t>(j)] +
               std::sqrt(comp.cov[static_cast<std::size_t>(j)]) * gen.next_gaussian();
      }
    }
  });
  return features;
}

}  // namespace

std::vector<int> sample_clean_labels(const PosteriorOracle& oracle, const Matrix& features,
                                     std::uint64_t seed) {
  if (features.cols != oracle.dimension())
    throw ValidationError("sample_clean_labels: feature dimension mismatch");
  const int C = oracle.num_classes();
  std::vector<int> labels(static_cast<std::size_t>(features.rows));
  par::for_each_index(features.rows, [&](std::int64_t i) {
    std::vector<double> p(static_cast<std::size_t>(C));
    oracle.posterior(features.row(i), p.data());
    auto gen = rng::at(seed, static_cast<std::uint64_t>(i));
    labels[static_cast<std::size_t>(i)] = gen.next_categorical(p);
  });
  return labels;
}

std::vector<int> bayes_labels(const PosteriorOracle& oracle, const Matrix& features) {
  if (features.cols != oracle.dimension())
    throw ValidationError("bayes_labels: feature dimension mismatch");
  std::vector<int> labels(static_cast<std::size_t>(features.rows));
  par::for_each_index(features.rows, [&](std::int64_t i) {
    labels[static_cast<std::size_t>(i)] = oracle.bayes_label(features.row(i));
  });
  return labels;
}

std::tuple<WorkingDataset, WorkingDataset, PosteriorOracle> make_gaussian_mixture(
    const MixtureSpec& spec, std::int64_t n_train, std::int64_t n_test, std::uint64_t seed) {
  spec.validate();
  if (n_train < 1 || n_test < 1)
    throw ValidationError("make_gaussian_mixture: n_train and n_test must be >= 1");

  PosteriorOracle oracle(spec);

  auto build = [&](std::int64_t n, std::uint64_t feat_stream, std::uint64_t label_stream,
                   const char* split) {
    WorkingDataset ds;
    ds.num_classes = spec.num_classes;
    ds.split = split;
    ds.features = sample_features(spec, oracle, n, rng::derive(seed, feat_stream));
    ds.clean_labels = sample_clean_labels(oracle, ds.features, rng::derive(seed, label_stream));
    ds.bayes_labels = bayes_labels(oracle, ds.features);
    ds.noisy_labels = ds.clean_labels;
    ds.working_labels = ds.clean_labels;
    ds.validate();
    return ds;
  };

  WorkingDataset train = build(n_train, kStreamTrainFeatures, kStreamTrainLabels, "train");
  WorkingDataset test = build(n_test, kStreamTestFeatures, kStreamTestLabels, "test");
  return {std::move(train), std::move(test), std::move(oracle)};
}

}  // namespace plc
