#pragma once

#include <stdexcept>
#include <string>

namespace plmc {

/// Raised when an argument value is outside its documented domain.
class invalid_parameter_error : public std::invalid_argument {
public:
    explicit invalid_parameter_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a model or run is missing constants an operation requires.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an estimator has no usable (non-diverged) input left.
class estimation_error : public std::runtime_error {
public:
    explicit estimation_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace plmc
