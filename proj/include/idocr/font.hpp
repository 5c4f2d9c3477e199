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
// File: include/idocr/font.hpp
// Purpose: TrueType glyph loading and anti-aliased rasterization
//
// Reads the sfnt tables we need (head, maxp, cmap format 4, loca, glyf,
// hmtx, hhea), decodes simple and composite glyph outlines, flattens the
// quadratic curves and scan-fills them with the nonzero winding rule at
// 4x4 supersampling. Enough TrueType for rendering character patches;
// hinting, kerning and CFF outlines are out.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "idocr/common.hpp"
#include "idocr/rng.hpp"
#include "idocr/utf8.hpp"

namespace idocr::font {

// Coverage bitmap for one glyph. `left` is the offset of the bitmap's left
// edge from the pen position; `top` is the distance from the baseline up to
// the bitmap's top row. Empty bitmaps (spaces) have width == height == 0.
struct GlyphRaster {
  int width = 0;
  int height = 0;
  int left = 0;
  int top = 0;
  double advance = 0;            // pen advance in pixels
  std::vector<u8> coverage;      // width*height, 0..255
};

namespace detail {

struct Pt {
  double x = 0, y = 0;
  bool on = true;
};

using Contour = std::vector<Pt>;

inline u16 rd_u16(const std::vector<u8>& d, size_t off) {
  if (off + 2 > d.size()) throw Error("font parse error: short read");
  return static_cast<u16>((d[off] << 8) | d[off + 1]);
}
inline i16 rd_i16(const std::vector<u8>& d, size_t off) {
  return static_cast<i16>(rd_u16(d, off));
}
inline u32 rd_u32(const std::vector<u8>& d, size_t off) {
  if (off + 4 > d.size()) throw Error("font parse error: short read");
  return (static_cast<u32>(d[off]) << 24) | (static_cast<u32>(d[off + 1]) << 16) |
         (static_cast<u32>(d[off + 2]) << 8) | d[off + 3];
}

}  // namespace detail

class FontFace {
 public:
  static FontFace load(const std::string& path) {
    FontFace f;
    f.path_ = path;
    size_t slash = path.find_last_of('/');
    size_t dot = path.find_last_of('.');
    size_t base = slash == std::string::npos ? 0 : slash + 1;
    f.name_ = path.substr(base, dot == std::string::npos || dot < base
                                    ? std::string::npos
                                    : dot - base);
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw Error("cannot open font: " + path);
    u8 buf[65536];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), fp)) > 0)
      f.data_.insert(f.data_.end(), buf, buf + n);
    std::fclose(fp);
    f.parse();
    return f;
  }

  const std::string& name() const { return name_; }
  const std::string& path() const { return path_; }

  // Content hash, used to prove font pools share no file.
  u64 data_hash() const { return fnv1a64(data_.data(), data_.size()); }

  bool has_glyph(u32 codepoint) const { return glyph_index(codepoint) != 0; }

  double ascent(double ppem) const { return ascender_ * ppem / upem_; }
  double descent(double ppem) const { return descender_ * ppem / upem_; }

  GlyphRaster rasterize(u32 codepoint, double ppem) const {
    u16 gid = glyph_index(codepoint);
    if (gid == 0)
      throw Error("glyph unavailable: font " + name_ + " symbol " +
                  utf8_encode(codepoint));
    return rasterize_gid(gid, ppem);
  }

  double advance_of(u32 codepoint, double ppem) const {
    u16 gid = glyph_index(codepoint);
    if (gid == 0)
      throw Error("glyph unavailable: font " + name_ + " symbol " +
                  utf8_encode(codepoint));
    return advance_units(gid) * ppem / upem_;
  }

 private:
  using Pt = detail::Pt;
  using Contour = detail::Contour;

  void parse() {
    using namespace detail;
    u32 sfnt = rd_u32(data_, 0);
    if (sfnt != 0x00010000 && sfnt != 0x74727565)
      throw Error("unsupported font format: " + path_);
    int num_tables = rd_u16(data_, 4);
    for (int i = 0; i < num_tables; ++i) {
      size_t rec = 12 + static_cast<size_t>(i) * 16;
      std::string tag(reinterpret_cast<const char*>(&data_[rec]), 4);
      tables_[tag] = rd_u32(data_, rec + 8);
    }
    for (const char* req : {"head", "maxp", "cmap", "loca", "glyf", "hmtx", "hhea"})
      if (!tables_.count(req))
        throw Error("font missing table " + std::string(req) + ": " + path_);
    size_t head = tables_["head"];
    upem_ = rd_u16(data_, head + 18);
    long_loca_ = rd_i16(data_, head + 50) != 0;
    num_glyphs_ = rd_u16(data_, tables_["maxp"] + 4);
    size_t hhea = tables_["hhea"];
    ascender_ = rd_i16(data_, hhea + 4);
    descender_ = rd_i16(data_, hhea + 6);
    num_hmetrics_ = rd_u16(data_, hhea + 34);
    parse_cmap();
  }

  void parse_cmap() {
    using namespace detail;
    size_t cmap = tables_.at("cmap");
    int n = rd_u16(data_, cmap + 2);
    size_t best = 0;
    for (int i = 0; i < n; ++i) {
      size_t rec = cmap + 4 + static_cast<size_t>(i) * 8;
      u16 plat = rd_u16(data_, rec), enc = rd_u16(data_, rec + 2);
      size_t sub = cmap + rd_u32(data_, rec + 4);
      bool unicode = (plat == 3 && (enc == 1 || enc == 10)) || plat == 0;
      if (unicode && rd_u16(data_, sub) == 4) best = sub;
    }
    if (!best) throw Error("no format-4 unicode cmap: " + path_);
    int seg_count = rd_u16(data_, best + 6) / 2;
    size_t end_codes = best + 14;
    size_t start_codes = end_codes + 2 * seg_count + 2;
    size_t deltas = start_codes + 2 * seg_count;
    size_t range_offsets = deltas + 2 * seg_count;
    for (int s = 0; s < seg_count; ++s) {
      u32 end = rd_u16(data_, end_codes + 2 * s);
      u32 start = rd_u16(data_, start_codes + 2 * s);
      i16 delta = rd_i16(data_, deltas + 2 * s);
      u16 ro = rd_u16(data_, range_offsets + 2 * s);
      if (start == 0xFFFF) continue;
      for (u32 c = start; c <= end && c != 0x10000; ++c) {
        u16 gid;
        if (ro == 0) {
          gid = static_cast<u16>((c + delta) & 0xFFFF);
        } else {
          size_t addr = range_offsets + 2 * s + ro + 2 * (c - start);
          gid = rd_u16(data_, addr);
          if (gid != 0) gid = static_cast<u16>((gid + delta) & 0xFFFF);
        }
        if (gid != 0) cmap_[c] = gid;
      }
    }
  }

  u16 glyph_index(u32 cp) const {
    auto it = cmap_.find(cp);
    return it == cmap_.end() ? 0 : it->second;
  }

  double advance_units(u16 gid) const {
    using namespace detail;
    size_t hmtx = tables_.at("hmtx");
    u16 idx = gid < num_hmetrics_ ? gid : static_cast<u16>(num_hmetrics_ - 1);
    return rd_u16(data_, hmtx + 4 * static_cast<size_t>(idx));
  }

  // [start, end) byte range of the glyph's glyf entry; empty when equal.
  std::pair<size_t, size_t> glyf_range(u16 gid) const {
    using namespace detail;
    size_t loca = tables_.at("loca");
    size_t glyf = tables_.at("glyf");
    size_t o0, o1;
    if (long_loca_) {
      o0 = rd_u32(data_, loca + 4 * static_cast<size_t>(gid));
      o1 = rd_u32(data_, loca + 4 * (static_cast<size_t>(gid) + 1));
    } else {
      o0 = 2 * static_cast<size_t>(rd_u16(data_, loca + 2 * static_cast<size_t>(gid)));
      o1 = 2 * static_cast<size_t>(rd_u16(data_, loca + 2 * (static_cast<size_t>(gid) + 1)));
    }
    return {glyf + o0, glyf + o1};
  }

  // Outline in font units. Recurses into composite components.
  std::vector<Contour> load_outline(u16 gid, int depth = 0) const {
    using namespace detail;
    std::vector<Contour> contours;
    if (depth > 6) throw Error("composite glyph nesting too deep: " + path_);
    if (gid >= num_glyphs_) throw Error("glyph id out of range: " + path_);
    auto [off, end] = glyf_range(gid);
    if (off == end) return contours;  // empty glyph (e.g. space)
    int n_contours = rd_i16(data_, off);
    if (n_contours >= 0) {
      std::vector<int> ends(n_contours);
      size_t p = off + 10;
      for (int i = 0; i < n_contours; ++i, p += 2) ends[i] = rd_u16(data_, p);
      int n_pts = n_contours ? ends.back() + 1 : 0;
      int instr = rd_u16(data_, p);
      p += 2 + instr;
      std::vector<u8> flags;
      flags.reserve(n_pts);
      while (static_cast<int>(flags.size()) < n_pts) {
        if (p >= data_.size()) throw Error("font parse error: flags overrun");
        u8 f = data_[p++];
        flags.push_back(f);
        if (f & 0x08) {  // repeat
          u8 rep = data_[p++];
          for (int r = 0; r < rep; ++r) flags.push_back(f);
        }
      }
      std::vector<double> xs(n_pts), ys(n_pts);
      double v = 0;
      for (int i = 0; i < n_pts; ++i) {
        u8 f = flags[i];
        if (f & 0x02) {
          u8 dx = data_[p++];
          v += (f & 0x10) ? dx : -static_cast<double>(dx);
        } else if (!(f & 0x10)) {
          v += rd_i16(data_, p);
          p += 2;
        }
        xs[i] = v;
      }
      v = 0;
      for (int i = 0; i < n_pts; ++i) {
        u8 f = flags[i];
        if (f & 0x04) {
          u8 dy = data_[p++];
          v += (f & 0x20) ? dy : -static_cast<double>(dy);
        } else if (!(f & 0x20)) {
          v += rd_i16(data_, p);
          p += 2;
        }
        ys[i] = v;
      }
      int start = 0;
      for (int ci = 0; ci < n_contours; ++ci) {
        Contour c;
        for (int i = start; i <= ends[ci]; ++i)
          c.push_back({xs[i], ys[i], (flags[i] & 0x01) != 0});
        if (!c.empty()) contours.push_back(std::move(c));
        start = ends[ci] + 1;
      }
    } else {
      // composite glyph
      size_t p = off + 10;
      bool more = true;
      while (more) {
        u16 flags = rd_u16(data_, p);
        u16 child = rd_u16(data_, p + 2);
        p += 4;
        double dx = 0, dy = 0;
        if (flags & 0x0001) {  // words
          if (flags & 0x0002) {
            dx = rd_i16(data_, p);
            dy = rd_i16(data_, p + 2);
          }
          p += 4;
        } else {
          if (flags & 0x0002) {
            dx = static_cast<signed char>(data_[p]);
            dy = static_cast<signed char>(data_[p + 1]);
          }
          p += 2;
        }
        double m[4] = {1, 0, 0, 1};
        auto f2d14 = [&](size_t q) { return detail::rd_i16(data_, q) / 16384.0; };
        if (flags & 0x0008) {
          m[0] = m[3] = f2d14(p);
          p += 2;
        } else if (flags & 0x0040) {
          m[0] = f2d14(p);
          m[3] = f2d14(p + 2);
          p += 4;
        } else if (flags & 0x0080) {
          m[0] = f2d14(p);
          m[1] = f2d14(p + 2);
          m[2] = f2d14(p + 4);
          m[3] = f2d14(p + 6);
          p += 8;
        }
        auto sub = load_outline(child, depth + 1);
        for (auto& c : sub) {
          for (auto& pt : c) {
            double x = m[0] * pt.x + m[2] * pt.y + dx;
            double y = m[1] * pt.x + m[3] * pt.y + dy;
            pt.x = x;
            pt.y = y;
          }
          contours.push_back(std::move(c));
        }
        more = (flags & 0x0020) != 0;
      }
    }
    return contours;
  }

  // Quadratic segments from a TrueType contour (consecutive off-curve
  // points imply an on-curve midpoint), flattened into a polygon.
  static std::vector<std::pair<double, double>> flatten_contour(const Contour& c,
                                                                double scale) {
    std::vector<Pt> pts = c;
    // rotate so pts[0] is on-curve; synthesize one if all are off-curve
    size_t first_on = pts.size();
    for (size_t i = 0; i < pts.size(); ++i)
      if (pts[i].on) {
        first_on = i;
        break;
      }
    if (first_on == pts.size()) {
      Pt mid{(pts[0].x + pts.back().x) / 2, (pts[0].y + pts.back().y) / 2, true};
      pts.insert(pts.begin(), mid);
    } else {
      std::rotate(pts.begin(), pts.begin() + first_on, pts.end());
    }
    std::vector<std::pair<double, double>> poly;
    auto emit = [&poly](double x, double y) { poly.emplace_back(x, y); };
    auto quad = [&emit, scale](const Pt& p0, const Pt& ctl, const Pt& p1) {
      double len = (std::hypot(ctl.x - p0.x, ctl.y - p0.y) +
                    std::hypot(p1.x - ctl.x, p1.y - ctl.y)) *
                   scale;
      int n = std::clamp(static_cast<int>(std::ceil(len / 2.0)), 2, 32);
      for (int k = 1; k <= n; ++k) {
        double t = static_cast<double>(k) / n;
        double u = 1.0 - t;
        emit(u * u * p0.x + 2 * u * t * ctl.x + t * t * p1.x,
             u * u * p0.y + 2 * u * t * ctl.y + t * t * p1.y);
      }
    };
    emit(pts[0].x, pts[0].y);
    size_t i = 1;
    Pt cur = pts[0];
    while (i <= pts.size()) {
      Pt a = pts[i % pts.size()];
      if (a.on) {
        emit(a.x, a.y);
        cur = a;
        ++i;
      } else {
        Pt b = pts[(i + 1) % pts.size()];
        Pt end = b.on ? b : Pt{(a.x + b.x) / 2, (a.y + b.y) / 2, true};
        quad(cur, a, end);
        cur = end;
        i += b.on ? 2 : 1;
      }
      if (i == pts.size() + 1) break;
    }
    return poly;
  }

  GlyphRaster rasterize_gid(u16 gid, double ppem) const {
    GlyphRaster out;
    double scale = ppem / upem_;
    out.advance = advance_units(gid) * scale;
    auto contours = load_outline(gid);
    if (contours.empty()) return out;

    std::vector<std::vector<std::pair<double, double>>> polys;
    double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
    for (const auto& c : contours) {
      auto poly = flatten_contour(c, scale);
      for (auto& [x, y] : poly) {
        x *= scale;
        y *= scale;
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
      polys.push_back(std::move(poly));
    }
    int x0 = static_cast<int>(std::floor(xmin)) - 1;
    int y0 = static_cast<int>(std::floor(ymin)) - 1;
    int x1 = static_cast<int>(std::ceil(xmax)) + 1;
    int y1 = static_cast<int>(std::ceil(ymax)) + 1;
    out.width = x1 - x0;
    out.height = y1 - y0;
    out.left = x0;
    out.top = y1;  // baseline to top edge
    out.coverage.assign(static_cast<size_t>(out.width) * out.height, 0);

    constexpr int kSS = 4;  // 4x4 supersampling
    // edges in supersample bitmap coordinates (y down)
    struct Edge {
      double x0, y0, x1, y1;
    };
    std::vector<Edge> edges;
    for (const auto& poly : polys) {
      for (size_t i = 0; i < poly.size(); ++i) {
        auto [ax, ay] = poly[i];
        auto [bx, by] = poly[(i + 1) % poly.size()];
        Edge e{(ax - x0) * kSS, (y1 - ay) * kSS, (bx - x0) * kSS, (y1 - by) * kSS};
        if (e.y0 != e.y1) edges.push_back(e);
      }
    }
    std::vector<std::pair<double, int>> crossings;  // x, winding step
    std::vector<int> row_acc(out.width);
    for (int ry = 0; ry < out.height; ++ry) {
      std::fill(row_acc.begin(), row_acc.end(), 0);
      for (int sub = 0; sub < kSS; ++sub) {
        double yc = ry * kSS + sub + 0.5;
        crossings.clear();
        for (const Edge& e : edges) {
          double lo = std::min(e.y0, e.y1), hi = std::max(e.y0, e.y1);
          if (yc < lo || yc >= hi) continue;
          double x = e.x0 + (yc - e.y0) * (e.x1 - e.x0) / (e.y1 - e.y0);
          crossings.emplace_back(x, e.y1 > e.y0 ? 1 : -1);
        }
        std::sort(crossings.begin(), crossings.end());
        int winding = 0;
        for (size_t k = 0; k + 1 <= crossings.size(); ++k) {
          winding += crossings[k].second;
          if (winding != 0 && k + 1 < crossings.size()) {
            double xa = crossings[k].first, xb = crossings[k + 1].first;
            int sxa = std::max(0, static_cast<int>(std::ceil(xa - 0.5)));
            int sxb = std::min(out.width * kSS - 1,
                               static_cast<int>(std::floor(xb - 0.5)));
            for (int sx = sxa; sx <= sxb; ++sx) row_acc[sx / kSS]++;
          }
        }
      }
      for (int x = 0; x < out.width; ++x) {
        int cov = row_acc[x] * 255 / (kSS * kSS);
        out.coverage[static_cast<size_t>(ry) * out.width + x] =
            static_cast<u8>(std::min(cov, 255));
      }
    }
    return out;
  }

  std::string path_, name_;
  std::vector<u8> data_;
  std::map<std::string, size_t> tables_;
  std::map<u32, u16> cmap_;
  int upem_ = 1000;
  int num_glyphs_ = 0;
  int num_hmetrics_ = 0;
  int ascender_ = 0, descender_ = 0;
  bool long_loca_ = false;
};

}  // namespace idocr::font
