#pragma once

#include <stdexcept>
#include <string>

namespace cvnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values in a loss or an objective.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (scene files, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration or scene recipe.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Spatial split leaves a class absent from one of the strips.
class SplitInfeasibleError : public Error {
 public:
  SplitInfeasibleError(const std::string& what, std::string class_name)
      : Error(what), class_name_(std::move(class_name)) {}
  const std::string& class_name() const noexcept { return class_name_; }

 private:
  std::string class_name_;
};

/// Metric requested on an empty confusion matrix.
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace cvnn
