#pragma once

#include <stdexcept>
#include <string>

namespace rancor {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inconsistent grid dimensions between operands.
struct DimensionError : Error {
    using Error::Error;
};

// File and format problems (data errors).
struct IoError : Error {
    using Error::Error;
};
struct BadMagicError : IoError {
    using IoError::IoError;
};
struct UnsupportedDatatypeError : IoError {
    using IoError::IoError;
};
struct TruncatedFileError : IoError {
    using IoError::IoError;
};

// Invalid parameter values or degenerate inputs.
struct InvalidInputError : Error {
    using Error::Error;
};

// Non-finite values or diverging iterations.
struct NumericalError : Error {
    using Error::Error;
};

} // namespace rancor
