#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace candsel {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument or violated data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input that cannot be rescaled or decided (e.g. a candidate set whose
// scores are all zero).
class DegenerateInputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, double best_rate)
      : Error(what), best_rate_(best_rate) {}

  double best_rate() const { return best_rate_; }

 private:
  double best_rate_;
};

}  // namespace candsel
