#pragma once

#include <stdexcept>
#include <string>

namespace anda {

// Base for every error raised by the library. The CLI maps each subclass to
// an exit code, so new subclasses should be rare.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed files, bad magic, truncated payloads, missing checkpoints.
class DataError : public Error {
 public:
  using Error::Error;
};

// An output failed a post-condition check (e.g. the l-inf ball).
class InvariantError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace anda
