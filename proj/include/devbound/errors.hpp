#pragma once

#include <stdexcept>
#include <string>

namespace devbound {

/// Input violates a documented invariant (bad parameter, unsorted sequence, ...).
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A computation would exceed a size or time cap.
class ResourceError : public std::runtime_error {
public:
    explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

/// An operation needs an integer count but only its logarithm is available.
class RepresentabilityError : public ResourceError {
public:
    explicit RepresentabilityError(const std::string& what) : ResourceError(what) {}
};

} // namespace devbound
