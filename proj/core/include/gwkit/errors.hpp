#ifndef GWKIT_ERRORS_HPP
#define GWKIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gwkit {

// Base class for everything thrown on purpose. The two branches matter for
// exit codes: InputError covers bad files, schemas and option values (CLI
// exit 1), NumericalError covers singular fits, non-convergence and other
// conditioning failures on data that parsed fine (CLI exit 2).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InputError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

// --- input side ---

class SchemaError : public InputError {
public:
    using InputError::InputError;
};

class ParseError : public InputError {
public:
    using InputError::InputError;
};

class InsufficientDataError : public InputError {
public:
    using InputError::InputError;
};

class TransformError : public InputError {
public:
    using InputError::InputError;
};

class ContractError : public InputError {
public:
    using InputError::InputError;
};

class IoError : public InputError {
public:
    using InputError::InputError;
};

// --- numerical side ---

class BandwidthError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SingularNeighbourhoodError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class LocalSingularityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class CollinearityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SaturatedModelError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NonConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateInputError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace gwkit

#endif
