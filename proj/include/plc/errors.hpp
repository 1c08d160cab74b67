#pragma once

#include <stdexcept>
#include <string>

namespace plc {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument or broken type invariant (bad spec, dimension mismatch, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Requested noise level cannot be reached even with all probabilities clipped at 1.
class InfeasibleTargetError : public Error {
 public:
  InfeasibleTargetError(double target, double attainable)
      : Error("target noise level " + std::to_string(target) +
              " is infeasible; attainable maximum is " + std::to_string(attainable)),
        target(target),
        attainable(attainable) {}
  double target;
  double attainable;
};

/// Training produced a non-finite loss.
class TrainingDivergedError : public Error {
 public:
  explicit TrainingDivergedError(int epoch)
      : Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
        epoch(epoch) {}
  int epoch;
};

/// A theory computation was requested on data that carries no oracle-backed fields.
class MissingOracleError : public Error {
 public:
  using Error::Error;
};

/// Operation not defined for this configuration (e.g. PMD check on a multi-class oracle).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Bad run configuration (file syntax, unknown key, out-of-range value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (unreadable input, unwritable output directory).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace plc
