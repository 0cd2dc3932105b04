#pragma once

#include <stdexcept>
#include <string>

namespace isearch {

/// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or out-of-domain input: microdata lines, numeric tables,
/// empty cohorts, values outside a declared range.
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration: schema files, pipeline config, parameter values.
class ConfigError : public Error {
public:
    using Error::Error;
};

}
