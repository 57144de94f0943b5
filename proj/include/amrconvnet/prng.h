// Copyright 2026 The AMRConvNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AMRCONVNET_PRNG_H_
#define AMRCONVNET_PRNG_H_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

// Deterministic randomness helpers. std::shuffle and the distribution
// classes are implementation-defined, so everything that must reproduce
// byte-identically (splits, batch orders, dropout masks) goes through
// these instead.

namespace amrconvnet {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Bounded draw in [0, n). The modulo bias is irrelevant here; what matters
// is that the result is pinned to mt19937_64's standardized output.
inline std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t n) {
  return rng() % n;
}

// Fisher-Yates with explicit draws.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(bounded_rand(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace amrconvnet

#endif  // AMRCONVNET_PRNG_H_
