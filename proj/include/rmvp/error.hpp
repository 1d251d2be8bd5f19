#pragma once

#include <stdexcept>
#include <string>

namespace rmvp {

// Base of every error raised by the library. The CLI maps the subclasses onto
// exit codes: ConfigError/ParseError/ValidationError -> 1, SolverError -> 2,
// IoError -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Point outside the meshed domain, evaluation on a singularity, ...
class GeometryError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace rmvp
