#pragma once

#include <stdexcept>
#include <string>

namespace krr {

    /// Base of every error raised by the library.
    class Error : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Parameters outside their documented domain.
    class InvalidParameter : public Error {
    public:
        using Error::Error;
    };

    /// Iterative or linear-algebra failure.
    class NumericalError : public Error {
    public:
        using Error::Error;
    };

    class NoBracket : public NumericalError {
    public:
        using NumericalError::NumericalError;
    };

    class NonConvergence : public NumericalError {
    public:
        using NumericalError::NumericalError;
    };

    class DegenerateDenominator : public NumericalError {
    public:
        using NumericalError::NumericalError;
    };

    class NegativeExcess : public NumericalError {
    public:
        using NumericalError::NumericalError;
    };

    class SingularSystem : public NumericalError {
    public:
        using NumericalError::NumericalError;
    };

    class IndefiniteMatrix : public NumericalError {
    public:
        using NumericalError::NumericalError;
    };

    /// Too few usable points for a fit or a split.
    class DegenerateWindow : public NumericalError {
    public:
        using NumericalError::NumericalError;
    };

    class InsufficientData : public Error {
    public:
        using Error::Error;
    };

    /// Malformed input files or tables.
    class SchemaError : public Error {
    public:
        using Error::Error;
    };

}  // namespace krr
