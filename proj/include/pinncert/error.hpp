#pragma once

#include <stdexcept>
#include <string>

namespace pinncert {

// Invalid or inconsistent user configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input shapes that do not match a network or problem.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Evaluation outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// API misuse, e.g. asking a tape for the gradient of a foreign scalar.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Non-finite values during training or integration (CLI exit code 3).
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, double where)
        : std::runtime_error(what), where_(where) {}

    // Epoch index for training, time for solvers.
    double where() const noexcept { return where_; }

private:
    double where_;
};

}  // namespace pinncert
