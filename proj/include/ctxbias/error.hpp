#pragma once

#include <stdexcept>
#include <string>

namespace ctxbias {

// Every failure raised by the library derives from Error so callers can catch
// one type at the boundary (the CLI maps Error to exit code 1).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible matrix/vector shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Out-of-range argument: probabilities, learning rates, label indices.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Model or experiment wiring that cannot work (missing context, bad layer order).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operation called in the wrong lifecycle state (backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  bad_magic,
  bad_version,
  truncated,
  trailing_bytes,
  count_mismatch,
  bad_dimensions,
  label_out_of_range,
  bad_record_length,
  empty_width,
  bad_value,
};

const char* to_string(ParseErrorKind kind);

// Malformed file contents. kind() identifies the failure class.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

}  // namespace ctxbias
