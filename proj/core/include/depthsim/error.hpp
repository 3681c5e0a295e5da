#pragma once

#include <stdexcept>
#include <string>

namespace depthsim {

// Base of every error the library throws. The CLI maps subclasses onto exit
// codes: ConfigError -> 2, everything else -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input: scene/config files, parameter ranges.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& where, int line, const std::string& what)
      : ConfigError(where + (line > 0 ? ":" + std::to_string(line) : "") + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

class MissingAssetError : public ConfigError {
 public:
  explicit MissingAssetError(const std::string& path)
      : ConfigError("missing asset: " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// A domain invariant does not hold. `field()` names the offending field.
class ValidationError : public ConfigError {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : ConfigError(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class RuntimeError : public Error {
 public:
  using Error::Error;
};

}  // namespace depthsim
