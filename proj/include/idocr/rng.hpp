// Copyright 2026 The idocr authors
//
// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License. You may
// obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Project: idocr
// File: include/idocr/rng.hpp
// Purpose: seeded, platform-independent randomness and seed derivation
//
// Every random choice in the project flows through Rng (xoshiro256**,
// state seeded by splitmix64) so corpora and training runs are exactly
// reproducible from a 64-bit seed on any platform. std::random is avoided
// on purpose: its distributions are not pinned by the standard.

#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "idocr/common.hpp"

namespace idocr {

// FNV-1a, 64 bit. Used for seed derivation and content fingerprints.
inline u64 fnv1a64(const void* data, size_t n, u64 h = 0xcbf29ce484222325ull) {
  const u8* p = static_cast<const u8*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline u64 fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline u64 splitmix64_next(u64& state) {
  u64 z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a master seed and a path-like
// key, e.g. derive_seed(master, "train/17/00042"). FNV over the master
// bytes plus the key, finished with one splitmix64 step for avalanche.
inline u64 derive_seed(u64 master, const std::string& key) {
  u8 mb[8];
  for (int i = 0; i < 8; ++i) mb[i] = static_cast<u8>(master >> (8 * i));
  u64 h = fnv1a64(mb, 8);
  h = fnv1a64(key.data(), key.size(), h);
  return splitmix64_next(h);
}

// xoshiro256** 1.0 (Blackman & Vigna, public-domain reference algorithm).
class Rng {
 public:
  explicit Rng(u64 seed) {
    u64 sm = seed;
    for (auto& w : s_) w = splitmix64_next(sm);
  }

  u64 next_u64() {
    u64 result = rotl(s_[1] * 5, 7) * 9;
    u64 t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, bound), bound > 0. Rejection keeps it unbiased.
  u64 below(u64 bound) {
    u64 threshold = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      u64 r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform integer in [lo, hi], inclusive.
  i64 range_i(i64 lo, i64 hi) {
    if (lo >= hi) return lo;
    return lo + static_cast<i64>(below(static_cast<u64>(hi - lo) + 1));
  }

  // Uniform in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double range_f(double lo, double hi) { return lo + (hi - lo) * unit(); }

  bool coin() { return (next_u64() >> 63) != 0; }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static u64 rotl(u64 x, int k) { return (x << k) | (x >> (64 - k)); }
  u64 s_[4];
};

}  // namespace idocr
