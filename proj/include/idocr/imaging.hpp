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
// File: include/idocr/imaging.hpp
// Purpose: raster primitives: adaptive binarization, axis projections,
//          affine warps, patch normalization

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "idocr/image.hpp"

namespace idocr::imaging {

// Summed-area table; sum over any rectangle in O(1).
class IntegralImage {
 public:
  explicit IntegralImage(const GrayImage& img)
      : w_(img.width), h_(img.height), sums_((w_ + 1) * (h_ + 1), 0) {
    for (int y = 0; y < h_; ++y) {
      u64 row = 0;
      for (int x = 0; x < w_; ++x) {
        row += img.at(x, y);
        sums_[(y + 1) * (w_ + 1) + (x + 1)] = sums_[y * (w_ + 1) + (x + 1)] + row;
      }
    }
  }

  // Sum over [x0,x1) x [y0,y1).
  u64 sum(int x0, int y0, int x1, int y1) const {
    return sums_[y1 * (w_ + 1) + x1] - sums_[y0 * (w_ + 1) + x1] -
           sums_[y1 * (w_ + 1) + x0] + sums_[y0 * (w_ + 1) + x0];
  }

 private:
  int w_, h_;
  std::vector<u64> sums_;
};

// Local-mean threshold: a pixel is foreground iff its intensity is below
// the mean of the window centered on it, minus `offset`. Windows are
// truncated at the image border.
inline BinaryImage binarize_adaptive(const GrayImage& img, int window = 25,
                                     int offset = 10) {
  if (img.empty()) throw Error("empty input");
  if (window < 1 || window % 2 == 0) throw Error("window must be odd and positive");
  IntegralImage integral(img);
  BinaryImage out(img.width, img.height);
  int r = window / 2;
  for (int y = 0; y < img.height; ++y) {
    int y0 = std::max(0, y - r), y1 = std::min(img.height, y + r + 1);
    for (int x = 0; x < img.width; ++x) {
      int x0 = std::max(0, x - r), x1 = std::min(img.width, x + r + 1);
      double area = static_cast<double>(x1 - x0) * (y1 - y0);
      double mean = static_cast<double>(integral.sum(x0, y0, x1, y1)) / area;
      out.at(x, y) = img.at(x, y) < mean - offset ? 1 : 0;
    }
  }
  return out;
}

// Per-row foreground counts; length equals height.
inline std::vector<int> h_projection(const BinaryImage& img) {
  if (img.empty()) throw Error("empty input");
  std::vector<int> counts(img.height, 0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) counts[y] += img.at(x, y) ? 1 : 0;
  return counts;
}

// Per-column foreground counts; length equals width.
inline std::vector<int> v_projection(const BinaryImage& img) {
  if (img.empty()) throw Error("empty input");
  std::vector<int> counts(img.width, 0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) counts[x] += img.at(x, y) ? 1 : 0;
  return counts;
}

// Nearest-neighbor warp; output has the input's size, source points outside
// the input read as `fill`.
inline GrayImage warp_affine(const GrayImage& img, const AffineTransform& t,
                             u8 fill) {
  if (img.empty()) throw Error("empty input");
  if (std::abs(t.det()) < 1e-12) throw Error("degenerate transform");
  GrayImage out(img.width, img.height, fill);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double sx, sy;
      t.apply(x, y, sx, sy);
      int ix = static_cast<int>(std::lround(sx));
      int iy = static_cast<int>(std::lround(sy));
      if (img.in_bounds(ix, iy)) out.at(x, y) = img.at(ix, iy);
    }
  }
  return out;
}

// Median of the one-pixel border ring; used as padding intensity so both
// dark-on-light and light-on-dark patches keep their background.
inline u8 border_median(const GrayImage& img) {
  std::vector<u8> ring;
  ring.reserve(2 * (img.width + img.height));
  for (int x = 0; x < img.width; ++x) {
    ring.push_back(img.at(x, 0));
    ring.push_back(img.at(x, img.height - 1));
  }
  for (int y = 1; y + 1 < img.height; ++y) {
    ring.push_back(img.at(0, y));
    ring.push_back(img.at(img.width - 1, y));
  }
  size_t mid = ring.size() / 2;
  std::nth_element(ring.begin(), ring.begin() + mid, ring.end());
  return ring[mid];
}

// Aspect-preserving rescale so the longer side equals `side`, centered on a
// canvas filled with the border-median intensity. Output is side x side.
inline GrayImage normalize_patch(const GrayImage& img, int side = 64) {
  if (img.empty()) throw Error("empty input");
  int longer = std::max(img.width, img.height);
  int tw = std::max(1, static_cast<int>(std::lround(
                           static_cast<double>(img.width) * side / longer)));
  int th = std::max(1, static_cast<int>(std::lround(
                           static_cast<double>(img.height) * side / longer)));
  GrayImage scaled(tw, th);
  for (int y = 0; y < th; ++y) {
    int sy = std::min(img.height - 1,
                      static_cast<int>((y + 0.5) * img.height / th));
    for (int x = 0; x < tw; ++x) {
      int sx = std::min(img.width - 1,
                        static_cast<int>((x + 0.5) * img.width / tw));
      scaled.at(x, y) = img.at(sx, sy);
    }
  }
  GrayImage out(side, side, border_median(img));
  int ox = (side - tw) / 2, oy = (side - th) / 2;
  for (int y = 0; y < th; ++y)
    for (int x = 0; x < tw; ++x) out.at(ox + x, oy + y) = scaled.at(x, y);
  return out;
}

}  // namespace idocr::imaging
