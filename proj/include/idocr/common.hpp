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
// File: include/idocr/common.hpp
// Purpose: small shared helpers (errors, worker pool)

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace idocr {

using u8 = std::uint8_t;
using u16 = std::uint16_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i16 = std::int16_t;
using i64 = std::int64_t;

// All recoverable failures surface as idocr::Error with a short
// machine-parseable message.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Process-wide worker count. Commands set this once from --threads.
inline int& worker_count() {
  static int n = static_cast<int>(std::thread::hardware_concurrency());
  return n;
}

// Runs fn(begin, end) over [0,n) split into contiguous blocks, one per
// worker. Each block writes only its own outputs, so results are identical
// for every worker count.
inline void parallel_for(i64 n, const std::function<void(i64, i64)>& fn) {
  int workers = worker_count();
  if (workers < 1) workers = 1;
  if (workers == 1 || n < 2) {
    fn(0, n);
    return;
  }
  if (workers > n) workers = static_cast<int>(n);
  std::vector<std::thread> pool;
  i64 chunk = (n + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    i64 b = t * chunk;
    i64 e = std::min<i64>(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace idocr
