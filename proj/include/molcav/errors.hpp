#pragma once

#include <stdexcept>
#include <string>

namespace molcav {

/// Input outside the domain of a physical model (non-positive rate, infeasible
/// lifetime pair, unstable loop gains, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Inputs are individually valid but jointly inconsistent (e.g. beta > 1).
class InconsistencyError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Configuration file does not satisfy the schema. `key()` names the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace molcav
