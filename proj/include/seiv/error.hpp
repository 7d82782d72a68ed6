#pragma once

#include <stdexcept>
#include <string>

namespace seiv {

/// Bad input: malformed config, out-of-range probability, mismatched dimensions.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Request exceeds a hard size guard (e.g. the 4^n master-equation oracle).
class CapacityError : public std::length_error {
public:
    explicit CapacityError(const std::string& what) : std::length_error(what) {}
};

/// A numerical invariant was violated at run time (bound crossing, failed check).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// I/O failure; the message carries the offending path.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace seiv
