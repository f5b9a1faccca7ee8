#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace svs {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value violates a documented invariant (range, shape, ordering of fields).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input bytes could not be parsed. `line` is 1-based, 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Frames or records arrived out of the required order.
class OrderingError : public Error {
 public:
  using Error::Error;
};

// A payload carried a key outside the privacy allow-list.
class PrivacyError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace svs
