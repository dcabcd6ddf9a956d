#pragma once

#include <stdexcept>
#include <string>

namespace tg {

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : GraphError {
  using GraphError::GraphError;
};

struct CycleDetected : GraphError {
  using GraphError::GraphError;
};

struct MissingInput : GraphError {
  using GraphError::GraphError;
};

struct ParseError : GraphError {
  using GraphError::GraphError;
};

struct InvalidGraph : GraphError {
  using GraphError::GraphError;
};

struct InvalidAction : GraphError {
  using GraphError::GraphError;
};

struct EpisodeNotDone : GraphError {
  using GraphError::GraphError;
};

struct NotScalarLoss : GraphError {
  using GraphError::GraphError;
};

struct LengthMismatch : GraphError {
  using GraphError::GraphError;
};

struct BudgetExceeded : GraphError {
  using GraphError::GraphError;
};

struct CheckpointVersionMismatch : GraphError {
  using GraphError::GraphError;
};

struct UnknownBenchmark : GraphError {
  using GraphError::GraphError;
};

struct ConfigError : GraphError {
  using GraphError::GraphError;
};

struct MissingCheckpoint : GraphError {
  using GraphError::GraphError;
};

struct EmptyTrace : GraphError {
  using GraphError::GraphError;
};

}  // namespace tg
