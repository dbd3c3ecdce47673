#pragma once

#include <stdexcept>
#include <string>

namespace monopsono {

// Failure classes surfaced by the command-line driver. Each maps onto one
// single-line diagnostic and exit status 1.

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace monopsono
