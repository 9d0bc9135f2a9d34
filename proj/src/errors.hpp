#pragma once

#include <stdexcept>
#include <string>

namespace wdtl {

// Base for everything thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition (bad argument, bad config key).
struct ContractError : Error {
    using Error::Error;
};

// Tensor/layer shape mismatch.
struct DimensionError : ContractError {
    using ContractError::ContractError;
};

// Malformed file contents; message names the offending byte/line offset.
struct FormatError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Training produced a non-finite loss; message names the iteration and loss.
struct NumericError : Error {
    using Error::Error;
};

} // namespace wdtl
