#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace equiorb {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised when a mutual distance falls below the collision floor.
class CollisionError : public Error {
 public:
  explicit CollisionError(const std::string& what,
                          std::optional<std::size_t> sample = std::nullopt)
      : Error(what), sample_(sample) {}

  /// Quadrature sample index at which the collision was detected, if any.
  std::optional<std::size_t> sample() const { return sample_; }

 private:
  std::optional<std::size_t> sample_;
};

class InvalidGenerator : public Error {
 public:
  using Error::Error;
};

class CapExceeded : public Error {
 public:
  using Error::Error;
};

class InvalidGroup : public Error {
 public:
  using Error::Error;
};

class SymmetryViolation : public Error {
 public:
  using Error::Error;
};

class InitFailure : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; the message names the offending field.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace equiorb
