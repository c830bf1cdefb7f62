#pragma once

#include <stdexcept>
#include <string>

namespace cloudfort {

/// Failure category. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Internal,         // exit 1
  InvalidInput,     // exit 2
  ClassifierFailure // exit 3
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_input(const std::string& what) {
  return Error(ErrorKind::InvalidInput, what);
}

inline Error classifier_failure(const std::string& what) {
  return Error(ErrorKind::ClassifierFailure, what);
}

/// Parse failure with a 1-based line number into the offending document.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& message)
      : Error(ErrorKind::InvalidInput,
              source + ":" + std::to_string(line) + ": " + message),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

}  // namespace cloudfort
