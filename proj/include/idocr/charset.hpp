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
// File: include/idocr/charset.hpp
// Purpose: fixed 74-symbol alphabet with the symbol <-> class id bijection

#pragma once

#include <array>
#include <string>
#include <vector>

#include "idocr/common.hpp"
#include "idocr/rng.hpp"
#include "idocr/utf8.hpp"

namespace idocr::charset {

// Class ids are positions in this list: 0-9 digits, 10-35 upper case,
// 36-61 lower case, 62-68 German extras, 69-73 punctuation.
inline const std::array<u32, 74>& codepoints() {
  static const std::array<u32, 74> cps = [] {
    std::array<u32, 74> a{};
    int k = 0;
    for (u32 c = '0'; c <= '9'; ++c) a[k++] = c;
    for (u32 c = 'A'; c <= 'Z'; ++c) a[k++] = c;
    for (u32 c = 'a'; c <= 'z'; ++c) a[k++] = c;
    for (u32 c : {0xDFu, 0xE4u, 0xF6u, 0xFCu, 0xC4u, 0xD6u, 0xDCu})
      a[k++] = c;  // ß ä ö ü Ä Ö Ü
    for (u32 c : {'.', '-', '/', '(', ')'}) a[k++] = c;
    return a;
  }();
  return cps;
}

constexpr int kNumClasses = 74;
constexpr int kDeskClasses = 36;  // digits plus upper case

inline const std::vector<std::string>& symbols() {
  static const std::vector<std::string> syms = [] {
    std::vector<std::string> s;
    for (u32 cp : codepoints()) s.push_back(utf8_encode(cp));
    return s;
  }();
  return syms;
}

// -1 when the codepoint is not in the alphabet.
inline int find_class(u32 codepoint) {
  const auto& cps = codepoints();
  for (int i = 0; i < kNumClasses; ++i)
    if (cps[i] == codepoint) return i;
  return -1;
}

inline int class_of(u32 codepoint) {
  int c = find_class(codepoint);
  if (c < 0) throw Error("symbol not in charset: " + utf8_encode(codepoint));
  return c;
}

inline u32 codepoint_of(int cls) {
  if (cls < 0 || cls >= kNumClasses) throw Error("class id out of range");
  return codepoints()[static_cast<size_t>(cls)];
}

inline const std::string& symbol_of(int cls) {
  if (cls < 0 || cls >= kNumClasses) throw Error("class id out of range");
  return symbols()[static_cast<size_t>(cls)];
}

// Identifies the alphabet inside model files so a model is never applied
// with a mismatched class order.
inline u64 charset_hash() {
  static const u64 h = [] {
    std::string cat;
    for (const auto& s : symbols()) cat += s;
    return fnv1a64(cat);
  }();
  return h;
}

inline bool is_digit_class(int cls) { return cls >= 0 && cls <= 9; }
inline bool is_upper_class(int cls) { return cls >= 10 && cls <= 35; }
inline bool is_lower_class(int cls) { return cls >= 36 && cls <= 61; }

}  // namespace idocr::charset
