// errors.hpp — Exception hierarchy shared by every cohlab module

#pragma once

#include <stdexcept>
#include <string>

namespace cohlab {

// Invalid input or configuration. CLI exit code 2.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParseError : DomainError {
    ParseError(const std::string& what, std::size_t line)
        : DomainError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Querying a model that holds no data.
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

// Numerical-quality failures. CLI exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularityError : NumericalError {
    using NumericalError::NumericalError;
};

struct BranchAmbiguityError : NumericalError {
    using NumericalError::NumericalError;
};

struct ConditioningError : NumericalError {
    using NumericalError::NumericalError;
};

struct DegenerateSampleError : NumericalError {
    using NumericalError::NumericalError;
};

struct GenerationQualityError : NumericalError {
    using NumericalError::NumericalError;
};

struct AbsorbingStateError : NumericalError {
    using NumericalError::NumericalError;
};

struct InfeasibleConstraintError : NumericalError {
    using NumericalError::NumericalError;
};

} // namespace cohlab
