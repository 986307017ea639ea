#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "wgad/tensor.hpp"

namespace wgad {

// Deterministic random stream. The raw engine is mt19937_64; uniform and
// normal draws are derived by fixed arithmetic (not std::*_distribution, whose
// output is implementation-defined), so a seed pins the exact sequence on any
// platform.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1) with 53 random bits.
  double u01();

  // Standard normal via Box-Muller; pairs are cached, so draws come two at a time.
  double normal();

  // Uniform integer on [0, n), rejection-sampled to avoid modulo bias.
  int64_t uniform_int(int64_t n);

  // Fisher-Yates shuffle, deterministic in the stream state.
  void shuffle(std::vector<int64_t>& idx);

  template <class T>
  void fill_normal(Tensor<T>& t) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(normal());
  }

  template <class T>
  void fill_uniform(Tensor<T>& t, double lo, double hi) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(lo + (hi - lo) * u01());
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent seed for a named component ("data", "init",
// "training", "inversion", ...) from the global seed, so re-seeding one
// component leaves the others' streams untouched.
uint64_t substream_seed(uint64_t global_seed, std::string_view name);

}  // namespace wgad
