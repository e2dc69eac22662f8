#pragma once

#include <stdexcept>
#include <string>

namespace sa_steady {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad user input: wrong dimensions, out-of-range parameters, unknown names.
struct InvalidArgument : Error {
    using Error::Error;
};

/// A numerical routine could not produce a trustworthy answer.
struct NumericalError : Error {
    using Error::Error;
};

/// Raised when a drift Jacobian fails Hurwitz certification.
struct NotHurwitz : NumericalError {
    using NumericalError::NumericalError;
};

/// Too many replicas left the divergence ball.
struct DivergenceError : Error {
    using Error::Error;
};

}  // namespace sa_steady
