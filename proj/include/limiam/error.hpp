#pragma once

#include <stdexcept>
#include <string>

namespace limiam {

/// Invalid arguments: shape mismatches, out-of-range parameters.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Data or tensors that are numerically degenerate for the requested
/// operation (zero-variance columns, vanishing pivots, rank deficiency).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ArgumentError(what);
}

}  // namespace limiam
