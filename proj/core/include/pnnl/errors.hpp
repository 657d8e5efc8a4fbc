#pragma once

#include <stdexcept>
#include <string>

namespace pnnl {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or missing input data: CSV/binary parse failures, invalid labels.
class DataError : public Error {
public:
    using Error::Error;
};

// Operand shapes disagree (matrix products, feature width vs model width).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values or hyperparameter lists.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A training operation was asked to do something the topology state forbids.
class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace pnnl
