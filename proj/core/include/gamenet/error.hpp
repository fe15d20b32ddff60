#pragma once

#include <stdexcept>
#include <string>

namespace gamenet {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible matrix / layer / modality dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN or Inf where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Operation called out of order (backward before forward, unfit scaler, ...).
class StateError : public Error {
public:
    using Error::Error;
};

/// Missing or unreadable input file.
class InputError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration or invalid hyperparameter.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input parsed but its content violates a precondition.
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace gamenet
