#pragma once

#include <stdexcept>

namespace nvzeno {

/// Invalid or inconsistent experiment/bath configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A request that would exceed a configured size/count budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, failed decompositions, broken numerical invariants.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nvzeno
