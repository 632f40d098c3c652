#pragma once

#include <stdexcept>
#include <string>

namespace sparsereg {

/// Raised when an argument violates an operation's contract.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A documented precondition on the data (not just the shape) does not hold.
class PreconditionError : public InvalidInput {
public:
    explicit PreconditionError(const std::string& what) : InvalidInput(what) {}
};

/// The linear program has an empty feasible set.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// An iteration or enumeration budget was exhausted.
class ResourceError : public std::runtime_error {
public:
    explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sparsereg
