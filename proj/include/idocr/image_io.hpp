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
// File: include/idocr/image_io.hpp
// Purpose: 8-bit grayscale PNG (libpng) and PGM P5 reading/writing

#pragma once

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "idocr/image.hpp"

namespace idocr {

inline void write_png(const std::string& path, const GrayImage& img) {
  if (img.empty()) throw Error("empty input");
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&pi, path.c_str(), 0, img.data.data(),
                               img.width /* row stride */, nullptr)) {
    throw Error("png write failed: " + path + ": " + pi.message);
  }
}

inline GrayImage read_png(const std::string& path) {
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str()))
    throw Error("png read failed: " + path + ": " + pi.message);
  pi.format = PNG_FORMAT_GRAY;
  GrayImage img(static_cast<int>(pi.width), static_cast<int>(pi.height));
  if (!png_image_finish_read(&pi, nullptr, img.data.data(), img.width,
                             nullptr)) {
    throw Error("png read failed: " + path + ": " + pi.message);
  }
  return img;
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  if (img.empty()) throw Error("empty input");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for write: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw Error("pgm write failed: " + path);
}

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw Error("not a P5 pgm: " + path);
  auto next_int = [&in, &path]() {
    // skip whitespace and # comments
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    int v;
    if (!(in >> v)) throw Error("bad pgm header: " + path);
    return v;
  };
  int w = next_int(), h = next_int(), maxval = next_int();
  if (maxval != 255) throw Error("unsupported pgm maxval: " + path);
  in.get();  // single whitespace after maxval
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw Error("truncated pgm: " + path);
  return img;
}

}  // namespace idocr
