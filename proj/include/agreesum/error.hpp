#pragma once

#include <stdexcept>
#include <string>

namespace agreesum {

// Base of every error raised by the library. `code()` is the stable,
// grep-able identifier the CLI prints as `ERROR:<code>:`.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("PARSE", what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::string code = "VALIDATION")
      : Error(std::move(code), what) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error("ARGUMENT", what) {}
};

class BuilderError : public Error {
 public:
  explicit BuilderError(const std::string& what) : Error("BUILDER", what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error("TRAINING", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("IO", what) {}
};

class ScorerUnavailable : public Error {
 public:
  explicit ScorerUnavailable(const std::string& what)
      : Error("SCORER_UNAVAILABLE", what) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error("PROTOCOL", what) {}
};

}  // namespace agreesum
