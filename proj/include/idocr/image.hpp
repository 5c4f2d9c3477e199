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
// File: include/idocr/image.hpp
// Purpose: raster value types shared by the whole pipeline

#pragma once

#include <cmath>
#include <cstdlib>
#include <vector>

#include "idocr/common.hpp"

namespace idocr {

// 8-bit single-channel raster, row major. 0 is black ink, 255 is white.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<u8> data;

  GrayImage() = default;
  GrayImage(int w, int h, u8 fill = 0) : width(w), height(h) {
    if (w < 1 || h < 1) throw Error("empty input");
    data.assign(static_cast<size_t>(w) * h, fill);
  }

  bool empty() const { return width == 0 || height == 0; }
  u8& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  u8 at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
};

// Thresholded raster; nonzero entries are foreground (ink).
struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<u8> data;  // 0 or 1

  BinaryImage() = default;
  BinaryImage(int w, int h, u8 fill = 0) : width(w), height(h) {
    if (w < 1 || h < 1) throw Error("empty input");
    data.assign(static_cast<size_t>(w) * h, fill ? 1 : 0);
  }

  bool empty() const { return width == 0 || height == 0; }
  u8& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  u8 at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
};

// 2x3 matrix mapping *output* pixel coordinates to *source* coordinates:
//   sx = a*x + b*y + tx,  sy = c*x + d*y + ty
// Factory arguments describe content motion, so the stored matrix is the
// inverse of what the name suggests.
struct AffineTransform {
  double a = 1, b = 0, tx = 0;
  double c = 0, d = 1, ty = 0;

  double det() const { return a * d - b * c; }

  void apply(double x, double y, double& sx, double& sy) const {
    sx = a * x + b * y + tx;
    sy = c * x + d * y + ty;
  }

  // Composition: this sampling lookup runs after `inner`'s content motion,
  // i.e. result maps output -> inner-source -> source.
  AffineTransform then(const AffineTransform& m) const {
    AffineTransform r;
    r.a = m.a * a + m.b * c;
    r.b = m.a * b + m.b * d;
    r.tx = m.a * tx + m.b * ty + m.tx;
    r.c = m.c * a + m.d * c;
    r.d = m.c * b + m.d * d;
    r.ty = m.c * tx + m.d * ty + m.ty;
    return r;
  }

  static AffineTransform identity() { return {}; }

  // Shift content by (dx, dy).
  static AffineTransform translation(double dx, double dy) {
    AffineTransform t;
    t.tx = -dx;
    t.ty = -dy;
    return t;
  }

  // Rotate content by `deg` counterclockwise about (cx, cy); pixel y grows
  // downward, so the sampling matrix uses the +deg rotation.
  static AffineTransform rotation_about(double deg, double cx, double cy) {
    double rad = deg * M_PI / 180.0;
    double co = std::cos(rad), si = std::sin(rad);
    AffineTransform t;
    t.a = co;
    t.b = -si;
    t.c = si;
    t.d = co;
    t.tx = cx - co * cx + si * cy;
    t.ty = cy - si * cx - co * cy;
    return t;
  }

  // Scale content by s about (cx, cy).
  static AffineTransform scale_about(double s, double cx, double cy) {
    AffineTransform t;
    t.a = 1.0 / s;
    t.d = 1.0 / s;
    t.tx = cx - cx / s;
    t.ty = cy - cy / s;
    return t;
  }

  // Maps source positions to output positions (where content lands).
  AffineTransform inverted() const {
    double dt = det();
    if (std::abs(dt) < 1e-12) throw Error("degenerate transform");
    AffineTransform r;
    r.a = d / dt;
    r.b = -b / dt;
    r.c = -c / dt;
    r.d = a / dt;
    r.tx = -(r.a * tx + r.b * ty);
    r.ty = -(r.c * tx + r.d * ty);
    return r;
  }
};

// Axis-aligned pixel rectangle.
struct Box {
  int x = 0, y = 0, w = 0, h = 0;

  int right() const { return x + w; }    // exclusive
  int bottom() const { return y + h; }   // exclusive

  bool contains(const Box& o) const {
    return o.x >= x && o.y >= y && o.right() <= right() &&
           o.bottom() <= bottom();
  }

  Box intersect(const Box& o) const {
    int x0 = std::max(x, o.x), y0 = std::max(y, o.y);
    int x1 = std::min(right(), o.right()), y1 = std::min(bottom(), o.bottom());
    if (x1 <= x0 || y1 <= y0) return {};
    return {x0, y0, x1 - x0, y1 - y0};
  }

  Box merge(const Box& o) const {
    if (w == 0 || h == 0) return o;
    if (o.w == 0 || o.h == 0) return *this;
    int x0 = std::min(x, o.x), y0 = std::min(y, o.y);
    int x1 = std::max(right(), o.right()), y1 = std::max(bottom(), o.bottom());
    return {x0, y0, x1 - x0, y1 - y0};
  }

  bool operator==(const Box& o) const {
    return x == o.x && y == o.y && w == o.w && h == o.h;
  }
};

inline GrayImage crop(const GrayImage& img, const Box& b) {
  if (b.w < 1 || b.h < 1 || b.x < 0 || b.y < 0 || b.right() > img.width ||
      b.bottom() > img.height)
    throw Error("crop out of bounds");
  GrayImage out(b.w, b.h);
  for (int y = 0; y < b.h; ++y)
    for (int x = 0; x < b.w; ++x) out.at(x, y) = img.at(b.x + x, b.y + y);
  return out;
}

inline BinaryImage crop(const BinaryImage& img, const Box& b) {
  if (b.w < 1 || b.h < 1 || b.x < 0 || b.y < 0 || b.right() > img.width ||
      b.bottom() > img.height)
    throw Error("crop out of bounds");
  BinaryImage out(b.w, b.h);
  for (int y = 0; y < b.h; ++y)
    for (int x = 0; x < b.w; ++x) out.at(x, y) = img.at(b.x + x, b.y + y);
  return out;
}

}  // namespace idocr
