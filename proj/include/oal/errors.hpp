#pragma once

#include <stdexcept>
#include <string>

namespace oal {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

/// Incompatible vector/matrix dimensions.
struct ShapeError : Error {
  using Error::Error;
};

/// Singular or indefinite matrix where SPD was required.
struct RankError : Error {
  using Error::Error;
};

/// Iterative kernel failed to converge.
struct NumericError : Error {
  using Error::Error;
};

/// Invalid labeling budget (k vs n).
struct BudgetError : Error {
  using Error::Error;
};

/// Operation on a state machine in the wrong phase.
struct StateError : Error {
  using Error::Error;
};

/// Not enough sample rows for a Monte-Carlo estimate.
struct SampleError : Error {
  using Error::Error;
};

/// Malformed input file.
struct ParseError : Error {
  using Error::Error;
};

}  // namespace oal
