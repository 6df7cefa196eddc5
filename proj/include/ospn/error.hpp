#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ospn {

// Base for all library errors. Subtypes map onto CLI exit codes in tools/.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape/dimension mismatch between tensors or masks.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid argument value (rate out of range, empty batch, bad mode, ...).
class ValueError : public Error {
public:
    using Error::Error;
};

// Non-finite values or diverged training.
class NumericError : public Error {
public:
    using Error::Error;
};

// API misuse: backward called twice, optimizer step on stale gradients.
class StateError : public Error {
public:
    using Error::Error;
};

// Malformed input file; message carries the offending line number.
class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Checkpoint with an unknown format version.
class FormatVersionError : public Error {
public:
    using Error::Error;
};

// Checkpoint payload fails its checksum or is truncated.
class CorruptionError : public Error {
public:
    using Error::Error;
};

// No Pareto-front member satisfies the size constraint.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& msg, std::size_t smallest_feasible_bytes)
        : Error(msg), smallest_feasible_bytes(smallest_feasible_bytes) {}
    std::size_t smallest_feasible_bytes;
};

// Bad command-line usage (missing required flag, unknown mode).
class UsageError : public Error {
public:
    using Error::Error;
};

} // namespace ospn
