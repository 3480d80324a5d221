#pragma once

#include <stdexcept>
#include <string>

namespace gridisle {

// Input that cannot be read or parsed (maps to CLI exit code 3).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, int line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what) {}
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally valid input that violates a model invariant (exit code 3).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric failure: non-convergence, singular system, eigensolver trouble (exit code 1).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Partition constraint that cannot be satisfied or is violated by a result (exit code 2).
class ConstraintError : public std::runtime_error {
public:
    explicit ConstraintError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gridisle
