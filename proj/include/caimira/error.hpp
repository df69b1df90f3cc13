#pragma once

#include <stdexcept>
#include <string>

namespace caimira {

// Base for every error the library raises on purpose. The CLI maps the
// concrete type to an exit code, so keep the hierarchy shallow.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad flags, missing files, impossible settings (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed input text or binary layout.
class FormatError : public Error {
public:
    using Error::Error;
};

class ParseError : public FormatError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : FormatError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Inputs that parse but contradict each other (duplicate ids, unknown refs).
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Non-finite or otherwise unusable numeric data.
class DataError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

// Caller violated a shape or index precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

// Divergence or non-finite gradients during optimization (exit code 4).
class TrainingError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace caimira
