#pragma once

#include <stdexcept>
#include <string>

namespace wgad {

// Process exit codes shared by the library and the CLI. Library code throws the
// typed errors below; the command layer maps them to these codes.
enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,    // unclassified error
  exit_config = 2,     // invalid or unparseable configuration
  exit_data = 3,       // missing/corrupt dataset or unusable report
  exit_diverged = 4,   // training tripped the divergence guard
  exit_checksum = 5,   // checkpoint CRC mismatch
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ChecksumError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Autodiff misuse (non-scalar backward target, shape mismatch, NaN in accumulation).
struct AutodiffError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace wgad
