#pragma once

#include <stdexcept>
#include <string>

namespace bagsac {

/// Precondition broken by the caller (shape mismatch, stale tape, stepping a
/// finished episode, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid or inconsistent run configuration. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value reached an optimizer or loss. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run directory lacks a file an operation needs. Maps to CLI exit code 3.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fewer evaluation checkpoints than a summary needs.
class InsufficientCheckpoints : public MissingArtifact {
 public:
  using MissingArtifact::MissingArtifact;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace bagsac
