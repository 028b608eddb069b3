#pragma once

#include <stdexcept>
#include <string>

namespace ksat {

enum class ErrorCode {
  InvalidArgument,
  Parse,
  Io,
  UndefinedInput,
  Transport,
  Authentication,
  Schema,
  Internal,
};

/// Base exception for every failure raised by the library. The C API maps
/// `code()` onto `ksat_status`.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

class ParseError : public Error {
public:
  ParseError(const std::string &what, std::size_t line = 0)
      : Error(ErrorCode::Parse,
              line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  /// 1-based line of the offending token, 0 when unknown.
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

} // namespace ksat
