#pragma once

#include <stdexcept>

namespace nfleak {

/// Raised when a computation diverges or produces non-finite values
/// (CLI exit code 2). Invalid inputs use std::invalid_argument / std::domain_error.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nfleak
