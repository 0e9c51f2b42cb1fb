#pragma once

#include <stdexcept>

namespace imago {

/// Input that violates a documented contract: an out-of-range label or index,
/// a malformed file line, an unknown approach name.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Filesystem or stream failure.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace imago
