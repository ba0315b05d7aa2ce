#pragma once

#include <stdexcept>
#include <string>

namespace syncmatrix {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch between tensors/streams.
struct DimensionError : Error {
    using Error::Error;
};

// Out-of-range or otherwise invalid argument (empty input, too few frames, ...).
struct ArgumentError : Error {
    using Error::Error;
};

// Mathematically degenerate input, e.g. normalizing a zero vector.
struct DegenerateInputError : Error {
    using Error::Error;
};

// Non-finite value where a finite one is required.
struct NumericError : Error {
    using Error::Error;
};

// Training diverged or could not proceed.
struct TrainingError : Error {
    using Error::Error;
};

// Bad configuration file, key, or value. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// File could not be read or written. CLI exit code 3.
struct IoError : Error {
    using Error::Error;
};

}  // namespace syncmatrix
