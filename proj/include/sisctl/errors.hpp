#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace sisctl {

/// Base for failures of the epidemic model at run time: broken observability,
/// evidence with zero probability, or an infeasible control problem.
class ModelError : public std::exception {
 public:
  explicit ModelError(std::string message, std::optional<std::size_t> node = std::nullopt)
      : message_(std::move(message)), node_(node) {}

  const char* what() const noexcept override { return message_.c_str(); }

  /// Node the error refers to, when there is one.
  std::optional<std::size_t> node() const noexcept { return node_; }

  /// Prefixes the message, e.g. with replication and step numbers. The dynamic
  /// type is preserved when the caller rethrows with `throw;`.
  void add_context(const std::string& context) { message_ = context + ": " + message_; }

 private:
  std::string message_;
  std::optional<std::size_t> node_;
};

/// The observer set does not cover the moralized graph where a computation needs it to.
class CoverViolation : public ModelError {
 public:
  using ModelError::ModelError;
};

/// The filter's evidence has (numerically) zero probability under the model.
class DegenerateEvidence : public ModelError {
 public:
  using ModelError::ModelError;
};

/// Conditioning the exact joint on an observation of zero probability.
class ZeroProbabilityEvidence : public ModelError {
 public:
  using ModelError::ModelError;
};

/// No point in the parameter box satisfies the decay constraint.
class Infeasible : public ModelError {
 public:
  Infeasible(std::string message, double minimal_constraint_value)
      : ModelError(std::move(message)), minimal_value_(minimal_constraint_value) {}

  /// Smallest constraint value attainable inside the box (positive).
  double minimal_constraint_value() const noexcept { return minimal_value_; }

 private:
  double minimal_value_;
};

/// Invalid configuration or input document.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sisctl
