#include "wgad/rng.hpp"

#include <cmath>

namespace wgad {

double RngStream::u01() {
  // 53 high bits scaled into [0, 1); matches the usual double-precision ladder.
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = u01();
  if (u1 <= 0.0) u1 = 0x1.0p-53;  // Box-Muller needs log(u1) finite
  double u2 = u01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

int64_t RngStream::uniform_int(int64_t n) {
  if (n <= 0) throw AutodiffError("uniform_int requires n > 0");
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<int64_t>(x % un);
}

void RngStream::shuffle(std::vector<int64_t>& idx) {
  for (int64_t i = static_cast<int64_t>(idx.size()) - 1; i > 0; --i) {
    int64_t j = uniform_int(i + 1);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
}

uint64_t substream_seed(uint64_t global_seed, std::string_view name) {
  // FNV-1a over the name, then a splitmix64 finalizer mixing in the global seed.
  uint64_t h = 1469598103934665603ull;
  for (char c : name) {
    h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ull;
  }
  uint64_t z = global_seed + 0x9e3779b97f4a7c15ull + h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace wgad
