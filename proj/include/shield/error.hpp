#pragma once

#include <stdexcept>
#include <string>

namespace shield {

/// Image or tensor dimensions disagree with what an operation expects.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter lies outside its documented domain (alpha, gamma, sigma, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or truncated file contents.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent or incomplete configuration (empty datasets, missing glyphs).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace shield
