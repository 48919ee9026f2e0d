#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kernelforge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument value (out-of-range integer, empty input, bad config).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf in an input or an intermediate result.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be invertible (or PSD) is not.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// Training left the stable regime. Carries the learning-rate bound estimate.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double lr_bound)
      : Error(what), lr_bound_(lr_bound) {}
  double lr_bound() const noexcept { return lr_bound_; }

 private:
  double lr_bound_;
};

/// IO failures (unreadable/unwritable files, malformed content).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace kernelforge
