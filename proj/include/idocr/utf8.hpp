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
// File: include/idocr/utf8.hpp
// Purpose: UTF-8 helpers for the non-ASCII charset symbols

#pragma once

#include <string>
#include <vector>

#include "idocr/common.hpp"

namespace idocr {

inline std::string utf8_encode(u32 cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

inline std::vector<u32> utf8_decode(const std::string& s) {
  std::vector<u32> cps;
  size_t i = 0;
  while (i < s.size()) {
    u8 c = static_cast<u8>(s[i]);
    u32 cp = 0;
    int extra = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      extra = 2;
    } else if ((c & 0xF8) == 0xF0) {
      cp = c & 0x07;
      extra = 3;
    } else {
      throw Error("invalid utf-8 byte at offset " + std::to_string(i));
    }
    if (i + extra >= s.size()) throw Error("truncated utf-8 sequence");
    for (int k = 1; k <= extra; ++k) {
      u8 cc = static_cast<u8>(s[i + k]);
      if ((cc & 0xC0) != 0x80) throw Error("invalid utf-8 continuation");
      cp = (cp << 6) | (cc & 0x3F);
    }
    cps.push_back(cp);
    i += extra + 1;
  }
  return cps;
}

inline std::string utf8_from_codepoints(const std::vector<u32>& cps) {
  std::string out;
  for (u32 cp : cps) out += utf8_encode(cp);
  return out;
}

}  // namespace idocr
