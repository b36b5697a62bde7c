#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lordiag {

/// Failure category; the CLI maps each one to a distinct exit code.
enum class ErrorKind { input, solver, verification };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// Expression syntax error carrying the byte offset of the first offending character.
class ParseError : public Error {
public:
  ParseError(std::size_t offset, const std::string& what)
      : Error(ErrorKind::input, what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

[[noreturn]] inline void throw_input(const std::string& msg) { throw Error(ErrorKind::input, msg); }
[[noreturn]] inline void throw_solver(const std::string& msg) { throw Error(ErrorKind::solver, msg); }

}  // namespace lordiag
