#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hcep {

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model or predicate text.
class SyntaxError : public EngineError {
 public:
  SyntaxError(const std::string& message, std::size_t line, std::size_t column)
      : EngineError(message + " (line " + std::to_string(line) + ", column " +
                    std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Well-formed model that breaks a model invariant.
class ValidationError : public EngineError {
 public:
  ValidationError(const std::string& constraintId, const std::string& message)
      : EngineError(constraintId.empty() ? message
                                         : "constraint \"" + constraintId + "\": " + message),
        constraint_id_(constraintId) {}

  const std::string& constraint_id() const { return constraint_id_; }

 private:
  std::string constraint_id_;
};

class UnknownSensor : public EngineError {
 public:
  explicit UnknownSensor(const std::string& id) : EngineError("unknown sensor '" + id + "'") {}
};

class UnknownActivity : public EngineError {
 public:
  explicit UnknownActivity(const std::string& id)
      : EngineError("unknown activity '" + id + "'") {}
};

class UnknownConstraint : public EngineError {
 public:
  explicit UnknownConstraint(const std::string& id)
      : EngineError("unknown constraint '" + id + "'") {}
};

class UnknownCase : public EngineError {
 public:
  explicit UnknownCase(const std::string& id) : EngineError("unknown case '" + id + "'") {}
};

/// Input older than the case watermark (minus lateness bound).
class StaleSample : public EngineError {
 public:
  StaleSample(double ts, double bound)
      : EngineError("stale input at t=" + std::to_string(ts) + " (bound " +
                    std::to_string(bound) + ")") {}
};

/// Out-of-order record in replay mode.
class OrderViolation : public EngineError {
 public:
  OrderViolation(std::size_t line, const std::string& detail)
      : EngineError("line " + std::to_string(line) + ": " + detail), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public EngineError {
 public:
  using EngineError::EngineError;
};

}  // namespace hcep
