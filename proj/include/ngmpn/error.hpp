#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ngmpn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnboundSymbol : public Error {
 public:
  explicit UnboundSymbol(std::string name)
      : Error("unbound symbol '" + name + "'"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class DivisionByZero : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed model file or structurally invalid net.
class ModelError : public Error {
 public:
  ModelError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Numerical failure: non-convergence, singular matrices, negative equilibria.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ngmpn
