#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace relight {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: empty light library, degenerate geometry, negative weights.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Array shapes that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A value violates a domain invariant (e.g. negative radiance).
class InvariantError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent file on disk. Always carries the offending path.
class FormatError : public Error {
 public:
  FormatError(const std::filesystem::path& path, const std::string& what)
      : Error(path.string() + ": " + what), path_(path) {}

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

// Checkpoint does not match the requested configuration or data.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace relight
