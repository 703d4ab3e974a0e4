#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mechkit {

// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& message)
      : Error("parse error at byte " + std::to_string(offset) + ": " + message), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnboundIdentifier : public Error {
 public:
  explicit UnboundIdentifier(const std::string& name)
      : Error("unbound identifier '" + name + "'"), name_(name) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

// Raised when an operation leaves its real domain (log/sqrt of a negative,
// division by zero, ...). The message names the offending subexpression.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  SingularMatrix(std::size_t pivot, double magnitude)
      : Error("singular matrix: pivot " + std::to_string(pivot) + " has magnitude " +
              std::to_string(magnitude)),
        pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

// A non-regular velocity Hessian. Carries the pivot index reported by the solver.
class SingularLagrangian : public Error {
 public:
  SingularLagrangian(const std::string& where, std::size_t pivot)
      : Error("singular Lagrangian at point " + where + " (Hessian pivot " + std::to_string(pivot) +
              ")"),
        pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class OffConstraint : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  IntegrationError(double time, const std::string& message)
      : Error("integration failed at t=" + std::to_string(time) + ": " + message), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace mechkit
