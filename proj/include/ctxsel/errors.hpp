#pragma once

#include <stdexcept>
#include <string>

namespace ctxsel {

// Process exit codes used by the CLI. Library errors carry one of these so
// the frontend can translate an exception into the right status.
enum class ExitCode : int {
  ok = 0,
  config = 2,
  numeric = 3,
  capacity = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error(ExitCode::capacity, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ExitCode::numeric, what) {}
};

// Incompatible operand shapes.
class ShapeError : public NumericError {
 public:
  explicit ShapeError(const std::string& what) : NumericError(what) {}
};

// Input outside an operation's domain (non-finite score, duplicate index, ...).
class DomainError : public NumericError {
 public:
  explicit DomainError(const std::string& what) : NumericError(what) {}
};

// Attention asked to run with zero context rows.
class EmptyContextError : public NumericError {
 public:
  explicit EmptyContextError(const std::string& what) : NumericError(what) {}
};

// Cosine (or a row normalization) hit a zero-norm vector.
class DegenerateVectorError : public NumericError {
 public:
  explicit DegenerateVectorError(const std::string& what) : NumericError(what) {}
};

// Selection budget exceeds the candidate pool.
class BudgetError : public ConfigError {
 public:
  explicit BudgetError(const std::string& what) : ConfigError(what) {}
};

// Segment appended out of order.
class SequencingError : public NumericError {
 public:
  explicit SequencingError(const std::string& what) : NumericError(what) {}
};

// A generated segment contains non-finite values.
class InvalidSegmentError : public NumericError {
 public:
  explicit InvalidSegmentError(const std::string& what) : NumericError(what) {}
};

// Cross-scene similarity requested on a single clip.
class NoValidPairsError : public NumericError {
 public:
  explicit NoValidPairsError(const std::string& what) : NumericError(what) {}
};

// GRPO group smaller than two rollouts.
class GroupSizeError : public ConfigError {
 public:
  explicit GroupSizeError(const std::string& what) : ConfigError(what) {}
};

// Checkpoint file damaged.
class CorruptionError : public ConfigError {
 public:
  explicit CorruptionError(const std::string& what) : ConfigError(what) {}
};

// Checkpoint written by an incompatible format version.
class MigrationError : public ConfigError {
 public:
  explicit MigrationError(const std::string& what) : ConfigError(what) {}
};

}  // namespace ctxsel
