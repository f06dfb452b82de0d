#pragma once

#include <stdexcept>
#include <string>

namespace mlg {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated precondition or invariant on caller-supplied data.
struct ValidationError : Error {
  using Error::Error;
};

// Malformed on-disk record. `line` is 1-based, 0 when not line-oriented.
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line_no)
      : Error(line_no ? "line " + std::to_string(line_no) + ": " + what : what), line(line_no) {}
  std::size_t line;
};

// Unreadable or missing input file.
struct InputError : Error {
  using Error::Error;
};

// Non-finite value surfaced during training or loss evaluation.
struct NumericalError : Error {
  using Error::Error;
};

// Synthetic generator could not satisfy its placement constraints.
struct GenerationError : Error {
  using Error::Error;
};

}  // namespace mlg
