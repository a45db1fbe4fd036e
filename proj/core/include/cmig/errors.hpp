#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmig {

/// Raised when a caller breaks an operation's preconditions (shape mismatch,
/// out-of-range count, malformed config). The CLI maps this to exit code 1.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised for numeric domain errors such as log of a non-positive value.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The weighted SVD was asked to solve an ill-posed (collinear) problem.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File or text parse failure. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Filesystem failure (missing file, unwritable directory).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cmig
