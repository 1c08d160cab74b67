#pragma once

#include <cstdint>
#include <vector>

#include "plc/errors.hpp"

namespace plc {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::int64_t r, std::int64_t c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r * c), fill) {}

  double& operator()(std::int64_t i, std::int64_t j) {
    return data[static_cast<std::size_t>(i * cols + j)];
  }
  double operator()(std::int64_t i, std::int64_t j) const {
    return data[static_cast<std::size_t>(i * cols + j)];
  }

  double* row(std::int64_t i) { return data.data() + i * cols; }
  const double* row(std::int64_t i) const { return data.data() + i * cols; }

  bool empty() const { return rows == 0 || cols == 0; }
};

/// Label predicted from a probability row. Binary ties at 1/2 resolve to
/// class 1 (indicator convention); multi-class ties resolve to the lowest
/// class index.
inline int argmax_label(const double* p, int num_classes) {
  if (num_classes == 2) {
    return p[1] >= 0.5 ? 1 : 0;
  }
  int best = 0;
  for (int c = 1; c < num_classes; ++c) {
    if (p[c] > p[best]) best = c;
  }
  return best;
}

/// Most and second-most confident class indices. The top index follows the
/// argmax_label convention so it always matches the Bayes label.
inline std::pair<int, int> top_two(const double* p, int num_classes) {
  if (num_classes < 2) throw ValidationError("top_two requires at least 2 classes");
  const int u = argmax_label(p, num_classes);
  int s = u == 0 ? 1 : 0;
  for (int c = 0; c < num_classes; ++c) {
    if (c != u && p[c] > p[s]) s = c;
  }
  return {u, s};
}

}  // namespace plc
