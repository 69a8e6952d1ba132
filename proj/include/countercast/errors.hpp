#pragma once

#include <stdexcept>
#include <string>

namespace ccast {

/// Base class for all countercast errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input file is missing a required column or has a malformed header.
struct SchemaError : Error {
    using Error::Error;
};

/// Data violates a structural invariant (duplicate keys, bad ordering).
struct IntegrityError : Error {
    using Error::Error;
};

/// Value outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

/// A lookup table (deflator, elasticities) does not cover a required key.
struct CoverageError : Error {
    using Error::Error;
};

/// Two series that must share a period axis do not.
struct AlignmentError : Error {
    using Error::Error;
};

/// Not enough observations to run an estimator.
struct SampleSizeError : Error {
    using Error::Error;
};

/// Series is constant (zero variance) and cannot be standardized or fit.
struct DegenerateSeriesError : Error {
    using Error::Error;
};

/// Design matrix is rank deficient.
struct CollinearityError : Error {
    using Error::Error;
};

/// Numerical failure inside an iterative routine (non-finite state).
struct NumericalError : Error {
    using Error::Error;
};

/// Bad run configuration (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

/// Upstream data problem (CLI exit code 3).
struct DataError : Error {
    using Error::Error;
};

/// Too many firms failed during a fleet run (CLI exit code 4).
struct PartialFailureError : Error {
    using Error::Error;
};

}  // namespace ccast
