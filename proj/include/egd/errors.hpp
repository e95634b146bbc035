#pragma once

#include <stdexcept>
#include <string>

namespace egd {

// Malformed input file (bad column count, non-numeric token, ...).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or inconsistent dataset (unlabeled instances,
// overlapping transcript segments, bad flag combinations, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shape disagreement.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf escaped a numeric op.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingDiverged : NumericError {
  int epoch;
  explicit TrainingDiverged(int epoch_index)
      : NumericError("training diverged (non-finite loss) at epoch " +
                     std::to_string(epoch_index)),
        epoch(epoch_index) {}
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File is not a checkpoint, or the format version is unsupported.
struct CheckpointMagicError : CheckpointError {
  using CheckpointError::CheckpointError;
};

// File ends before the parameter payload declared by the manifest.
struct CheckpointTruncatedError : CheckpointError {
  using CheckpointError::CheckpointError;
};

// Manifest disagrees with the declared architecture or payload layout.
struct CheckpointManifestError : CheckpointError {
  using CheckpointError::CheckpointError;
};

}  // namespace egd
