#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stbn {

// Bad argument to a constructor or factory (sigma <= 0, alpha outside (0,1), ...).
class InvalidParameter : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Bad data handed to an operation (empty sequence, mismatched sizes, ...).
class InvalidInput : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t line, const std::string &what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

// A loaded object that parses fine but breaks one of its invariants.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class EmptySubsetError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class TileFormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class MagicMismatchError : public TileFormatError {
  public:
    using TileFormatError::TileFormatError;
};

class UnsupportedVersionError : public TileFormatError {
  public:
    using TileFormatError::TileFormatError;
};

class TruncatedPayloadError : public TileFormatError {
  public:
    using TileFormatError::TileFormatError;
};

}  // namespace stbn
