#pragma once

#include <stdexcept>
#include <string>

namespace depthscale {

// Shape or size disagreement between operands.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; carries the byte offset where parsing stopped.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, long offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
    long byte_offset;
};

// A masked reduction was asked to average over zero valid elements.
struct EmptyMaskError : std::runtime_error {
    explicit EmptyMaskError(const std::string& msg) : std::runtime_error(msg) {}
};

// Normal equations of the least-squares alignment are singular.
struct DegenerateAlignmentError : std::runtime_error {
    explicit DegenerateAlignmentError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad caller-supplied value (empty token list, bad range, ...).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or incompatible configuration / checkpoint.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value where a finite one is required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace depthscale
