#pragma once

#include <stdexcept>
#include <string>

namespace crowdcluster {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A line of input could not be parsed.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input parsed but violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The same (annotator, instance) pair appeared twice.
class DuplicateError : public Error {
public:
    using Error::Error;
};

/// Operation called with arguments outside its contract.
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// Configuration value outside its allowed range.
class InvalidConfigError : public Error {
public:
    using Error::Error;
};

/// Two structures that must describe the same population do not.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// Model applied to data of incompatible scheme or arity.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Filesystem or stream failure.
class IoError : public Error {
public:
    using Error::Error;
};

namespace detail {

/// Rethrows the active library error with a message prefix. The dynamic type
/// survives, so downstream classification (user error vs internal) does too.
[[noreturn]] inline void rethrow_prefixed(const std::string& prefix) {
    try {
        throw;
    } catch (const ParseError& e) {
        throw ParseError(prefix + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(prefix + e.what());
    } catch (const DuplicateError& e) {
        throw DuplicateError(prefix + e.what());
    } catch (const InvalidInputError& e) {
        throw InvalidInputError(prefix + e.what());
    } catch (const InvalidConfigError& e) {
        throw InvalidConfigError(prefix + e.what());
    } catch (const ConsistencyError& e) {
        throw ConsistencyError(prefix + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    } catch (const Error& e) {
        throw Error(prefix + e.what());
    }
}

}  // namespace detail

}  // namespace crowdcluster
