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
// File: include/idocr/segment.hpp
// Purpose: text-field decomposition into lines, strings and characters
//
// Lines and strings come from projection-profile gaps; characters come
// from border-following contour search, then span-overlap merging (umlaut
// dots), speckle rejection, and valley splitting of fused glyphs.

#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "idocr/common.hpp"
#include "idocr/image.hpp"
#include "idocr/imaging.hpp"

namespace idocr::segment {

struct Component {
  Box box;                                    // outer-border bounding box
  int area = 0;                               // pixels in the component
  std::vector<std::pair<int, int>> contour;   // outer border, trace order
};

// Border following over 8-connected foreground. The raster scan starts an
// outer border at a foreground pixel with background to its west, a hole
// border at one with background to its east; hole borders are traced only
// so they cannot re-trigger as outer borders. One component per outer
// border; `area` counts the pixels enclosed (filled from the border).
inline std::vector<Component> trace_contours(const BinaryImage& img) {
  const int w = img.width, h = img.height;
  auto fg = [&](int x, int y) {
    return x >= 0 && x < w && y >= 0 && y < h && img.at(x, y) != 0;
  };
  // neighbor order: clockwise starting east, in image coordinates
  static const int dx8[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  static const int dy8[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  constexpr u8 kOnBorder = 1, kRightExamined = 2;
  std::vector<u8> mark(static_cast<size_t>(w) * h, 0);
  auto mk = [&](int x, int y) -> u8& { return mark[static_cast<size_t>(y) * w + x]; };

  auto trace = [&](int sx, int sy, int start_dir,
                   std::vector<std::pair<int, int>>& out) {
    // find first neighbor clockwise from start_dir
    int d0 = -1;
    for (int k = 0; k < 8; ++k) {
      int d = (start_dir + k) % 8;
      int nx = sx + dx8[d], ny = sy + dy8[d];
      if (fg(nx, ny)) {
        d0 = d;
        break;
      }
      if (d == 0) mk(sx, sy) |= kRightExamined;
    }
    mk(sx, sy) |= kOnBorder;
    out.emplace_back(sx, sy);
    if (d0 < 0) return;  // isolated pixel
    int fx = sx + dx8[d0], fy = sy + dy8[d0];  // first found neighbor
    int cx = sx, cy = sy;                       // current border pixel
    int px = fx, py = fy;                       // previously found neighbor
    while (true) {
      // search counterclockwise around (cx, cy) from just after (px, py)
      int pd = 0;
      for (int d = 0; d < 8; ++d)
        if (cx + dx8[d] == px && cy + dy8[d] == py) {
          pd = d;
          break;
        }
      int nd = -1;
      for (int k = 1; k <= 8; ++k) {
        int d = (pd - k + 16) % 8;
        int nx = cx + dx8[d], ny = cy + dy8[d];
        if (fg(nx, ny)) {
          nd = d;
          break;
        }
        if (d == 0) mk(cx, cy) |= kRightExamined;
      }
      int nx = cx + dx8[nd], ny = cy + dy8[nd];
      if (nx == sx && ny == sy && cx == fx && cy == fy) break;  // closed
      px = cx;
      py = cy;
      cx = nx;
      cy = ny;
      mk(cx, cy) |= kOnBorder;
      out.emplace_back(cx, cy);
    }
  };

  std::vector<Component> comps;
  std::vector<int> label(static_cast<size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg(x, y)) continue;
      bool west_bg = !fg(x - 1, y);
      bool east_bg = !fg(x + 1, y);
      if (west_bg && !(mk(x, y) & kOnBorder)) {
        Component c;
        trace(x, y, 4, c.contour);  // start searching from the west
        int x0 = w, y0 = h, x1 = -1, y1 = -1;
        for (auto [px, py] : c.contour) {
          x0 = std::min(x0, px);
          y0 = std::min(y0, py);
          x1 = std::max(x1, px);
          y1 = std::max(y1, py);
        }
        c.box = Box{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
        // fill from the border to count the component's pixels
        int id = static_cast<int>(comps.size()) + 1;
        std::deque<std::pair<int, int>> queue;
        for (auto [px, py] : c.contour) {
          auto& l = label[static_cast<size_t>(py) * w + px];
          if (l == 0) {
            l = id;
            queue.emplace_back(px, py);
          }
        }
        while (!queue.empty()) {
          auto [qx, qy] = queue.front();
          queue.pop_front();
          ++c.area;
          for (int d = 0; d < 8; ++d) {
            int nx = qx + dx8[d], ny = qy + dy8[d];
            if (!fg(nx, ny)) continue;
            auto& l = label[static_cast<size_t>(ny) * w + nx];
            if (l == 0) {
              l = id;
              queue.emplace_back(nx, ny);
            }
          }
        }
        comps.push_back(std::move(c));
      } else if (east_bg && !(mk(x, y) & kRightExamined)) {
        std::vector<std::pair<int, int>> hole;
        trace(x, y, 0, hole);  // start searching from the east
        mk(x, y) |= kRightExamined;
      }
    }
  }
  return comps;
}

// Maximal runs of rows whose foreground count exceeds the noise floor,
// bridged across gaps shorter than min_gap. Boxes are tight in x.
inline std::vector<Box> split_lines(const BinaryImage& field, int min_gap = 2,
                                    double noise_floor = 0.02) {
  auto proj = imaging::h_projection(field);
  double floor_px = noise_floor * field.width;
  std::vector<std::pair<int, int>> runs;  // [y0, y1] inclusive
  int start = -1;
  for (int y = 0; y <= field.height; ++y) {
    bool text = y < field.height && proj[static_cast<size_t>(y)] > floor_px;
    if (text && start < 0) start = y;
    if (!text && start >= 0) {
      runs.emplace_back(start, y - 1);
      start = -1;
    }
  }
  // bridge short gaps
  std::vector<std::pair<int, int>> merged;
  for (auto& r : runs) {
    if (!merged.empty() && r.first - merged.back().second - 1 < min_gap)
      merged.back().second = r.second;
    else
      merged.push_back(r);
  }
  std::vector<Box> out;
  std::vector<long> masses;
  for (auto [y0, y1] : merged) {
    int x0 = field.width, x1 = -1;
    long mass = 0;
    for (int y = y0; y <= y1; ++y)
      for (int x = 0; x < field.width; ++x)
        if (field.at(x, y)) {
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
          ++mass;
        }
    if (x1 < 0) continue;
    out.push_back(Box{x0, y0, x1 - x0 + 1, y1 - y0 + 1});
    masses.push_back(mass);
  }
  // Background smudges away from the text read as shallow, light bands.
  // Real lines keep at least 0.4x the tallest band's height (an x-height
  // only line next to a capital line is ~0.45x) and 0.03x of its ink mass.
  if (out.size() > 1) {
    int max_h = 0;
    long max_mass = 0;
    for (size_t i = 0; i < out.size(); ++i) {
      max_h = std::max(max_h, out[i].h);
      max_mass = std::max(max_mass, masses[i]);
    }
    std::vector<Box> kept;
    for (size_t i = 0; i < out.size(); ++i)
      if (out[i].h >= 0.4 * max_h && masses[i] >= 0.03 * max_mass)
        kept.push_back(out[i]);
    out = kept;
  }
  return out;
}

// Splits a line at column-gap runs wider than gap_factor times the median
// intra-character gap (lower median). With at most one gap there is no
// usable statistic and the line stays one string. Boxes are tight in y.
inline std::vector<Box> split_strings(const BinaryImage& line,
                                      double gap_factor = 2.5) {
  auto proj = imaging::v_projection(line);
  std::vector<std::pair<int, int>> runs;  // [x0, x1] inclusive
  int start = -1;
  for (int x = 0; x <= line.width; ++x) {
    bool ink = x < line.width && proj[static_cast<size_t>(x)] > 0;
    if (ink && start < 0) start = x;
    if (!ink && start >= 0) {
      runs.emplace_back(start, x - 1);
      start = -1;
    }
  }
  if (runs.empty()) return {};
  std::vector<int> gaps;
  for (size_t i = 1; i < runs.size(); ++i)
    gaps.push_back(runs[i].first - runs[i - 1].second - 1);
  double threshold = -1;
  if (gaps.size() >= 2) {
    std::vector<int> sorted = gaps;
    std::nth_element(sorted.begin(), sorted.begin() + (sorted.size() - 1) / 2,
                     sorted.end());
    threshold = gap_factor * sorted[(sorted.size() - 1) / 2];
  }
  std::vector<std::pair<int, int>> groups{runs[0]};
  for (size_t i = 1; i < runs.size(); ++i) {
    if (threshold >= 0 && gaps[i - 1] > threshold)
      groups.push_back(runs[i]);
    else
      groups.back().second = runs[i].second;
  }
  std::vector<Box> out;
  for (auto [x0, x1] : groups) {
    int y0 = line.height, y1 = -1;
    for (int y = 0; y < line.height; ++y)
      for (int x = x0; x <= x1; ++x)
        if (line.at(x, y)) {
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
        }
    if (y1 < 0) continue;
    out.push_back(Box{x0, y0, x1 - x0 + 1, y1 - y0 + 1});
  }
  return out;
}

struct CharPatch {
  Box box;
  GrayImage patch;  // 64x64, aspect-preserving, border-median padded
};

namespace detail {

inline int span_overlap(const Box& a, const Box& b) {
  return std::min(a.right(), b.right()) - std::max(a.x, b.x);
}

// v_projection restricted to a box, indices local to the box.
inline std::vector<int> box_v_projection(const BinaryImage& img, const Box& b) {
  std::vector<int> proj(static_cast<size_t>(b.w), 0);
  for (int y = b.y; y < b.bottom(); ++y)
    for (int x = b.x; x < b.right(); ++x)
      if (img.at(x, y)) proj[static_cast<size_t>(x - b.x)]++;
  return proj;
}

inline Box tighten_y(const BinaryImage& img, Box b) {
  int y0 = b.bottom(), y1 = b.y - 1;
  for (int y = b.y; y < b.bottom(); ++y)
    for (int x = b.x; x < b.right(); ++x)
      if (img.at(x, y)) {
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
        break;
      }
  if (y1 < b.y) return b;
  return Box{b.x, y0, b.w, y1 - y0 + 1};
}

}  // namespace detail

// Characters from one string image: contour components, merged when their
// horizontal spans overlap at least half of the narrower span (diacritic
// dots), speckles under 4 px with no merge partner dropped, groups wider
// than 1.6x the median width split at their lowest interior column count
// (leftmost on ties). Patches crop the gray image at each box.
inline std::vector<CharPatch> extract_chars(const BinaryImage& string_img,
                                            const GrayImage& gray) {
  if (string_img.width != gray.width || string_img.height != gray.height)
    throw Error("mask and gray dimensions differ");
  auto comps = trace_contours(string_img);
  if (comps.empty()) return {};

  const size_t n = comps.size();
  std::vector<size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<size_t(size_t)> find = [&](size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::vector<bool> has_partner(n, false);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      int ov = detail::span_overlap(comps[i].box, comps[j].box);
      int narrower = std::min(comps[i].box.w, comps[j].box.w);
      if (ov * 2 >= narrower) {
        parent[find(i)] = find(j);
        has_partner[i] = has_partner[j] = true;
      }
    }

  struct Group {
    Box box;
    int area = 0;
  };
  std::vector<Group> groups;
  std::vector<size_t> root_of(n);
  std::map<size_t, size_t> group_index;
  for (size_t i = 0; i < n; ++i) {
    size_t r = find(i);
    auto it = group_index.find(r);
    if (it == group_index.end()) {
      group_index[r] = groups.size();
      groups.push_back({comps[i].box, comps[i].area});
    } else {
      groups[it->second].box = groups[it->second].box.merge(comps[i].box);
      groups[it->second].area += comps[i].area;
    }
    root_of[i] = group_index[r];
  }
  std::vector<bool> partnered(groups.size(), false);
  for (size_t i = 0; i < n; ++i)
    if (has_partner[i]) partnered[root_of[i]] = true;

  // Ink level separates background smudges from small real marks: a period
  // carries the same ink as its neighbours while a smudge that slipped past
  // binarization sits close to the background gray.
  long bg_sum = 0, bg_cnt = 0;
  for (int y = 0; y < gray.height; ++y)
    for (int x = 0; x < gray.width; ++x)
      if (!string_img.at(x, y)) {
        bg_sum += gray.at(x, y);
        ++bg_cnt;
      }
  double bg_level = bg_cnt ? bg_sum / double(bg_cnt) : 255.0;
  std::vector<double> contrast(groups.size(), 0.0);
  for (size_t g = 0; g < groups.size(); ++g) {
    const Box& b = groups[g].box;
    long sum = 0, cnt = 0;
    for (int y = b.y; y < b.bottom(); ++y)
      for (int x = b.x; x < b.right(); ++x)
        if (string_img.at(x, y)) {
          sum += gray.at(x, y);
          ++cnt;
        }
    contrast[g] = cnt ? std::max(0.0, bg_level - sum / double(cnt)) : 0.0;
  }
  std::vector<int> areas_sorted;
  std::vector<double> contrast_sorted;
  for (size_t g = 0; g < groups.size(); ++g) {
    areas_sorted.push_back(groups[g].area);
    contrast_sorted.push_back(contrast[g]);
  }
  // upper medians so a lone glyph outvotes a lone smudge
  std::sort(areas_sorted.begin(), areas_sorted.end());
  std::sort(contrast_sorted.begin(), contrast_sorted.end());
  double med_area = areas_sorted[areas_sorted.size() / 2];
  double med_contrast = contrast_sorted[contrast_sorted.size() / 2];

  std::vector<Box> boxes;
  for (size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].area < 4 && !partnered[g]) continue;  // speckle
    if (!partnered[g] && groups[g].area < 0.35 * med_area &&
        contrast[g] < 0.65 * med_contrast)
      continue;  // small and washed out: smudge, not a mark
    boxes.push_back(groups[g].box);
  }
  if (boxes.empty()) return {};

  std::vector<int> widths;
  for (const Box& b : boxes) widths.push_back(b.w);
  std::nth_element(widths.begin(), widths.begin() + (widths.size() - 1) / 2,
                   widths.end());
  double median_w = widths[(widths.size() - 1) / 2];

  std::vector<Box> final_boxes;
  std::deque<Box> pending(boxes.begin(), boxes.end());
  while (!pending.empty()) {
    Box b = pending.front();
    pending.pop_front();
    if (b.w <= 1.6 * median_w || b.w < 4) {
      final_boxes.push_back(b);
      continue;
    }
    // the valley of a fused pair lies away from the edges, and edge columns
    // (serif tips) are near-empty, so search only the central half
    auto proj = detail::box_v_projection(string_img, b);
    int lo = b.w / 4, hi = b.w - b.w / 4;
    int cut = lo;
    for (int x = lo; x < hi; ++x)
      if (proj[static_cast<size_t>(x)] < proj[static_cast<size_t>(cut)]) cut = x;
    Box left{b.x, b.y, cut, b.h};
    Box right{b.x + cut, b.y, b.w - cut, b.h};
    pending.push_front(right);
    pending.push_front(left);
  }

  for (Box& b : final_boxes) b = detail::tighten_y(string_img, b);
  std::sort(final_boxes.begin(), final_boxes.end(), [](const Box& a, const Box& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.w < b.w;
  });

  std::vector<CharPatch> out;
  for (const Box& b : final_boxes) {
    CharPatch cp;
    cp.box = b;
    cp.patch = imaging::normalize_patch(crop(gray, b), 64);
    out.push_back(std::move(cp));
  }
  return out;
}

struct SegmentParams {
  int binarize_window = 25;
  int binarize_offset = 10;
  int min_gap = 2;
  double noise_floor = 0.02;
  double gap_factor = 2.5;
};

struct StringSeg {
  Box box;
  std::vector<CharPatch> chars;
};

struct LineSeg {
  Box box;
  std::vector<StringSeg> strings;
};

// Full decomposition of one gray field. All boxes are in field coordinates
// and nest strictly: char within string within line within field.
struct SegmentationResult {
  std::vector<LineSeg> lines;
};

inline SegmentationResult segment_field(const GrayImage& field,
                                        const SegmentParams& p = {}) {
  SegmentationResult res;
  BinaryImage bin =
      imaging::binarize_adaptive(field, p.binarize_window, p.binarize_offset);
  for (const Box& lb : split_lines(bin, p.min_gap, p.noise_floor)) {
    LineSeg line;
    line.box = lb;
    BinaryImage line_bin = crop(bin, lb);
    for (Box sb : split_strings(line_bin, p.gap_factor)) {
      sb.x += lb.x;
      sb.y += lb.y;
      StringSeg str;
      str.box = sb;
      BinaryImage str_bin = crop(bin, sb);
      GrayImage str_gray = crop(field, sb);
      str.chars = extract_chars(str_bin, str_gray);
      for (auto& cp : str.chars) {
        cp.box.x += sb.x;
        cp.box.y += sb.y;
      }
      line.strings.push_back(std::move(str));
    }
    res.lines.push_back(std::move(line));
  }
  return res;
}

}  // namespace idocr::segment
