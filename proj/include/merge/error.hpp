#pragma once

#include <stdexcept>
#include <string>

namespace merge {

/// Base error for malformed inputs and violated contracts.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when training produces a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace merge
