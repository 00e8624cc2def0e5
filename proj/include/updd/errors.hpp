#pragma once

#include <stdexcept>
#include <string>

namespace updd {

// Incompatible tensor shapes for a primitive or a loss.
class ShapeError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

// A NaN/Inf surfaced in a forward value, a loss or a diffusion state.
class NumericError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Malformed or unreadable input data (files, checkpoints, configs).
class DataError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Bad command line or configuration key.
class UsageError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

}  // namespace updd
