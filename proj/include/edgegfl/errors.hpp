#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace edgegfl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A row could not be normalized because its norm vanished.
class DegenerateRowError : public Error {
 public:
  DegenerateRowError(std::size_t row, const std::string& what)
      : Error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Numerical evaluation produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Dataset files are missing, malformed or inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Training aborted (divergence or non-finite gradients).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace edgegfl
