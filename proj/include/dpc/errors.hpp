#pragma once

#include <stdexcept>
#include <string>

namespace dpc {

// Shape disagreement between tensors (matmul operands, elementwise pairs, ...).
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Out-of-range row/column access or slice.
class IndexError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated an operation's contract (non-scalar loss, empty batch,
// non-deterministic closure, non-finite input).
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or inconsistent config sections.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training diverged or could not proceed.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Artifact-level validation failure (checkpoint/config mismatch, missing data).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dpc
