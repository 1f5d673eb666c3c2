#pragma once

#include <stdexcept>
#include <string>

namespace mckv {

/// Rejected input: a violated precondition, malformed configuration or
/// mismatched shapes. Raised before any numerical work is attempted.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A run produced a state the numerics cannot continue from (non-finite
/// positions, negative densities beyond tolerance).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mckv
