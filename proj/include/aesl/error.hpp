#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace aesl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of an operation (sigma <= 0, zero
/// centered norm, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed to reach tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A training loss became non-finite. `component()` names the loss term.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::string component)
      : Error(what), component_(std::move(component)) {}
  const std::string& component() const noexcept { return component_; }

 private:
  std::string component_;
};

/// Statistic is undefined because the input carries no separation.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

enum class DataErrorKind { kMissingFile, kRowMismatch, kInvalidLabel, kMalformed };

class DataError : public Error {
 public:
  DataError(DataErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  DataErrorKind kind() const noexcept { return kind_; }

 private:
  DataErrorKind kind_;
};

/// Invalid run configuration; carries one message per offending field.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> fields)
      : Error(join(fields)), fields_(std::move(fields)) {}
  const std::vector<std::string>& fields() const noexcept { return fields_; }

 private:
  static std::string join(const std::vector<std::string>& f) {
    std::string out;
    for (const auto& s : f) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> fields_;
};

}  // namespace aesl
