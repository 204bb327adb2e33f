// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ptk/error.hpp"
#include "ptk/sha256.hpp"

namespace ptk {

/// Deterministic RNG for everything seeded in the toolkit. mt19937_64 output
/// is specified by the standard, and bounded draws use rejection sampling, so
/// identical seeds give identical results on every platform and stdlib.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  /// Uniform draw in [0, n).
  std::uint64_t below(std::uint64_t n) {
    require(n > 0, "Rng::below(0)");
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                          std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = eng_();
    } while (r >= limit);
    return r % n;
  }

  /// Forward Fisher-Yates; the first k positions of a shuffle equal sample(k).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    partial_shuffle(v, v.size());
  }

  template <typename T>
  void partial_shuffle(std::vector<T>& v, std::size_t k) {
    std::size_t n = v.size();
    if (k > n) k = n;
    for (std::size_t i = 0; i + 1 < n && i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(v[i], v[j]);
    }
  }

  /// k items drawn without replacement, in draw order.
  template <typename T>
  std::vector<T> sample(std::vector<T> pool, std::size_t k) {
    require(k <= pool.size(), "sample: k=", k, " exceeds pool size ", pool.size());
    partial_shuffle(pool, k);
    pool.resize(k);
    return pool;
  }

 private:
  std::mt19937_64 eng_;
};

/// Stage/key seed derivation: first 8 bytes (little-endian) of
/// SHA-256("<master as decimal>:<label>"). Every module that needs its own
/// stream derives from the single top-level seed through this rule.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  Sha256 h;
  h.update(std::to_string(master));
  h.update(":");
  h.update(label);
  auto digest = h.finish();
  std::uint64_t seed = 0;
  for (int i = 7; i >= 0; --i) seed = (seed << 8) | digest[static_cast<std::size_t>(i)];
  return seed;
}

}  // namespace ptk
