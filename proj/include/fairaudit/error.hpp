#pragma once

#include <stdexcept>
#include <string>

namespace fairaudit {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid experiment configuration (bad file, bad field, missing input). Exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Invalid or degenerate data (parse failure, missing column, undefined rate). Exit code 2.
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace fairaudit
