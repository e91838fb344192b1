#pragma once

#include <stdexcept>
#include <string>

namespace readest {

// Base for every error raised by the toolkit. The category names the
// contract that was violated so callers (and the CLI) can report it.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(category + " error: " + what), category_(std::move(category)) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("parse", "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct OrderingError : Error {
  explicit OrderingError(const std::string& w) : Error("ordering", w) {}
};
struct StructuralError : Error {
  explicit StructuralError(const std::string& w) : Error("structural", w) {}
};
struct LookupError : Error {
  explicit LookupError(const std::string& w) : Error("lookup", w) {}
};
struct RangeError : Error {
  explicit RangeError(const std::string& w) : Error("range", w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error("shape", w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error("numeric", w) {}
};
struct LabelError : Error {
  explicit LabelError(const std::string& w) : Error("label", w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};
struct CoverageError : Error {
  explicit CoverageError(const std::string& w) : Error("coverage", w) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error("domain", w) {}
};
struct JoinError : Error {
  explicit JoinError(const std::string& w) : Error("join", w) {}
};
struct PairingError : Error {
  explicit PairingError(const std::string& w) : Error("pairing", w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error("io", w) {}
};

}  // namespace readest
