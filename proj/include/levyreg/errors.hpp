#pragma once

#include <stdexcept>
#include <string>

namespace levyreg {

// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Singular systems, non-convergence, degenerate roots.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A model, policy or configuration violates a declared invariant.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Analytic and simulated answers disagree beyond the declared tolerance.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace levyreg
