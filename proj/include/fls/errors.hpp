#pragma once

#include <stdexcept>
#include <string>

namespace fls {

/// A point or map left the chart domain of the active model.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// A caller violated an operation's precondition (mismatched bases, shapes, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Step budget exhausted before a stopping condition was met.
struct NonconvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dirichlet reduction exceeded its iteration cap.
struct ReductionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A density fit could not be made positive.
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad command line or configuration.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fls
