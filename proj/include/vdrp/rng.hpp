// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "vdrp/tensor.hpp"

namespace vdrp {

// SplitMix64 counter generator. The output stream depends only on the seed
// and the sequence of calls, so it is identical on every platform.
//
// Normal deviates use the Marsaglia polar transform on pairs of uniforms; the
// second deviate of each accepted pair is cached and returned by the next
// call. This transform is frozen: changing it invalidates golden outputs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  double normal();

  // Independent generator for a sub-task; a pure function of (seed, stream),
  // not of how far this generator has advanced.
  Rng child(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  std::optional<double> spare_;
};

std::uint64_t mix64(std::uint64_t z);

Tensor standard_normal(Rng& rng, std::size_t n);

}  // namespace vdrp
