#ifndef AMCMC_ERRORS_HPP
#define AMCMC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace amcmc {

// Invalid graphs, kernels and configuration values raise std::invalid_argument;
// logs and ratios of nonpositive arguments raise std::domain_error. The types
// below cover the failure modes that callers are expected to tell apart.

/// A density entry is zero where the mobility or rate construction divides by it.
class positivity_violation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// pi_i Q_ij != pi_j Q_ji beyond tolerance.
class detailed_balance_violation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// I + Q dt has a negative entry for a fixed-step update.
class step_too_large : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive step shrinking went below the configured floor.
class step_underflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation only defined for a subset of methods (e.g. constant Onsager matrix).
class unsupported_method : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Kernel of a Laplacian-like matrix has the wrong dimension.
class numerical_rank_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace amcmc

#endif  // AMCMC_ERRORS_HPP
