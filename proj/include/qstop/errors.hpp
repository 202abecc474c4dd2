#pragma once

#include <stdexcept>
#include <string>

namespace qstop {

// Configuration file problems: parse failures, missing keys, invalid values.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint file problems: missing, corrupt, or architecture mismatch.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A brute-force or enumeration routine was asked to exceed its size limits.
struct SizeGuardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qstop
