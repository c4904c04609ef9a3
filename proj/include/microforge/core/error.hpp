#pragma once

#include <stdexcept>
#include <string>

namespace microforge {

// Precondition violations throw std::invalid_argument. The types below carry
// the failure classes the command line maps onto exit codes.

/// A configuration document failed validation.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Reading or writing a file failed.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An iterative generator did not reach its stopping criterion.
struct NonConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace microforge
