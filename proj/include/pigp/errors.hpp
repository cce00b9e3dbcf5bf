#pragma once

#include <stdexcept>
#include <string>

namespace pigp {

// Invalid arguments (negative dt, bad derivative order, mismatched grids...)
// are reported with std::domain_error / std::invalid_argument. The types
// below cover the failure classes the CLI maps onto distinct exit codes.

/// Matrix factorization or optimization failed.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Run configuration failed validation.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File missing, unreadable or malformed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace pigp
