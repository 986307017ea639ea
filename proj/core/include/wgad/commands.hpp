#pragma once

#include <cstdint>
#include <string>

namespace wgad {

// Parsed command line; the CLI front end fills this and calls run_command.
struct CliOptions {
  std::string command;          // train | train-encoder | score | eval | gen-toy | invert
  std::string config_path;      // --config (required)
  std::string out_dir;          // --out, overrides run.out_dir
  bool has_seed = false;        // --seed, overrides run.seed
  uint64_t seed = 0;
  std::string precision = "f64";  // --precision f32|f64
  std::string gen_path;         // --gen
  std::string critic_path;      // --critic
  std::string encoder_path;     // --encoder
  std::string report_path;      // --report (eval)
  std::string input_path;       // --input (invert)
};

// Runs one command end to end and maps failures onto the stable exit codes:
// 0 success, 2 configuration, 3 data, 4 divergence, 5 checksum, 1 anything else.
int run_command(const CliOptions& opts);

}  // namespace wgad
