#pragma once

#include <stdexcept>
#include <string>

namespace qfb {

/// Input violates a documented invariant (non-Hermitian state, angle out of range, ...).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to produce a trustworthy answer.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The stationary equation has no unique, well-conditioned solution.
class SteadyStateError : public SolverError {
public:
    using SolverError::SolverError;
};

} // namespace qfb
