#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cwc {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape mismatch between tensors (matmul inner dims, gamma/beta length, ...).
struct DimensionError : Error {
    using Error::Error;
};

// Invalid configuration: heads not dividing dim, patch not dividing image,
// cluster count out of [2,256], depth 0, non-positive platform constants.
struct ConfigError : Error {
    using Error::Error;
};

// Values outside the operation's domain (non-finite input, zero size).
struct DomainError : Error {
    using Error::Error;
};

// Requested clustering cannot be satisfied (k exceeds distinct values).
struct InfeasibleError : Error {
    using Error::Error;
};

// Malformed byte stream. `offset` is the position the parser rejected.
struct ParseError : Error {
    std::size_t offset;
    ParseError(const std::string& what, std::size_t off)
        : Error(what + " (byte offset " + std::to_string(off) + ")"), offset(off) {}
};

// Structurally valid stream whose payload is inconsistent, e.g. a clustered
// index pointing past the end of its codebook.
struct CorruptionError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Two models that were expected to share a graph topology do not.
struct GraphError : Error {
    using Error::Error;
};

}  // namespace cwc
