#pragma once

#include <stdexcept>
#include <string>

namespace hlic {

// Base for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user input: malformed files, mismatched shapes, invalid config.
// The CLI maps this to exit code 2.
class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& msg) : Error(msg) {}
};

// Numerical failure: non-finite values, domain violations mid-computation.
// The CLI maps this to exit code 3.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace hlic
