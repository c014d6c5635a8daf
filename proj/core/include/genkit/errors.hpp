#pragma once

#include <stdexcept>
#include <string>

namespace genkit {

// Bad inputs: malformed files, role violations, out-of-range parameters.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration: unknown keys, missing required entries.
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Numerical failures: degenerate weights, single-arm data, inestimable cells.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Rank-deficient design; message names the collinear columns.
class SingularDesignError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

} // namespace genkit
