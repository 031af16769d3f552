#pragma once

#include <stdexcept>
#include <string>

namespace xmrt {

enum class ErrorKind { config, contract, data, domain, io };

// Base for every error raised by the library. The CLI maps these to exit
// code 1; usage problems are reported separately with exit code 2.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Invalid configuration value (tau <= 0, batch size < 2, ...).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

// Caller broke an interface precondition (shape mismatch, wrong axis, ...).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(ErrorKind::contract, what) {}
};

// Input data is unusable (bad labels, empty relevance, unpaired caption, ...).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

// Numerical domain violation (zero-norm embedding row).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace xmrt
