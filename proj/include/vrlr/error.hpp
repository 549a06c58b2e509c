#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vrlr {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  ShapeError(const std::string& context, std::size_t expected, std::size_t actual);

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

// A value that should be finite was NaN or infinite.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& context, std::size_t index);

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `location` is a row index for text formats and a byte
// offset for binary ones.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t location);

  std::size_t location() const noexcept { return location_; }

 private:
  std::size_t location_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& message);

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace vrlr
