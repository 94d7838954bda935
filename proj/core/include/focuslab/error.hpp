#pragma once

#include <stdexcept>
#include <string>

namespace focuslab {

/// Precondition violated by the caller (bad shape, even kernel size, empty image, ...).
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thin-lens configuration with the object at (or numerically at) the focal point.
class DegenerateGeometry : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Focus position outside the lens range.
class RangeError : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

/// Malformed focal-stack directory, checkpoint, or config file.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite activation, gradient or loss. The message names the layer or tensor.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace focuslab
