#pragma once

#include <stdexcept>
#include <string>

namespace candlecast {

/// Bad configuration: unknown keys, invalid grid values, unusable flags.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad input data: malformed CSV, invalid bars, missing files.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller violated a documented precondition.
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

/// Failure while reading or writing artifacts (checkpoints, reports, images).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Training diverged or a model could not be assembled.
class RuntimeError : public std::runtime_error {
public:
    explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace candlecast
