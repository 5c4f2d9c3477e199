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
// File: include/idocr/synthgen.hpp
// Purpose: synthetic character and text-field rendering plus corpus files
//
// Two render paths share one noise/affine model: 64x64 character patches
// (center glyph with two random neighbors) and whole text fields with
// per-glyph ground-truth boxes. Corpora are written as PNG trees with a
// JSONL manifest; every sample's seed derives from the master seed and the
// sample's own address, so samples regenerate in isolation and parallel
// runs are bit-identical to serial ones.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "idocr/charset.hpp"
#include "idocr/common.hpp"
#include "idocr/font.hpp"
#include "idocr/image.hpp"
#include "idocr/image_io.hpp"
#include "idocr/imaging.hpp"
#include "idocr/rng.hpp"
#include "idocr/toml.hpp"
#include "idocr/utf8.hpp"

namespace idocr::synthgen {

struct GenParams {
  std::string pool = "source";
  int bg_min = 140, bg_max = 255;   // background gray
  int ink_min = 0, ink_max = 80;    // glyph gray
  int blotch_min = 0, blotch_max = 12;
  double blotch_r_min = 1.0, blotch_r_max = 4.0;
  int blotch_delta = 40;            // blotch gray = background +- this
  double size_min = 28.0, size_max = 40.0;  // pixels per em
  double rot_deg = 3.0;             // joint rotation, +- degrees
  double trans_px = 4.0;            // joint translation, +- pixels
  double gap_min = 2.0, gap_max = 8.0;  // neighbor gap after advance
  int side = 64;

  static GenParams source_defaults() { return GenParams{}; }

  // Low-contrast fixed-pitch rendering standing in for scanned documents.
  static GenParams pseudo_real_defaults() {
    GenParams p;
    p.pool = "pseudo_real";
    p.bg_min = 120;
    p.bg_max = 200;
    p.ink_min = 20;
    p.ink_max = 90;
    return p;
  }
};

inline void validate_params(const GenParams& p) {
  bool ok = p.bg_min <= p.bg_max && p.ink_min <= p.ink_max &&
            p.blotch_min <= p.blotch_max && p.blotch_r_min <= p.blotch_r_max &&
            p.size_min <= p.size_max && p.gap_min <= p.gap_max &&
            p.rot_deg >= 0 && p.rot_deg <= 10.0 && p.trans_px >= 0 &&
            p.side == 64;
  if (!ok) throw Error("invalid generator params");
}

enum class Provenance { synthetic, mined, augmented };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::synthetic: return "synthetic";
    case Provenance::mined: return "mined";
    default: return "augmented";
  }
}

inline Provenance provenance_from(const std::string& s) {
  if (s == "synthetic") return Provenance::synthetic;
  if (s == "mined") return Provenance::mined;
  if (s == "augmented") return Provenance::augmented;
  throw Error("unknown provenance: " + s);
}

struct CharSample {
  GrayImage image;
  int label = -1;
  Provenance provenance = Provenance::synthetic;
  u64 seed = 0;
};

struct TextFieldSample {
  GrayImage image;
  std::string text;
  std::vector<Box> boxes;  // one per non-space character, reading order
  GenParams style;
  u64 seed = 0;
};

// What the character renderer actually drew; lets tests check neighbor
// sampling without re-deriving the RNG stream.
struct RenderTrace {
  int left_class = -1;
  int right_class = -1;
  Box center_box;
};

// Font pools keyed by label, loaded from a fonts.toml next to the files.
class FontLibrary {
 public:
  static FontLibrary load(const std::string& fonts_toml) {
    FontLibrary lib;
    auto doc = toml::Document::parse_file(fonts_toml);
    auto dir = std::filesystem::path(fonts_toml).parent_path();
    std::map<u64, std::string> seen;  // content hash -> pool
    for (const auto& entry : doc.array_of_tables("font")) {
      auto file_it = entry.find("file");
      auto pool_it = entry.find("pool");
      if (file_it == entry.end() || pool_it == entry.end())
        throw Error("fonts.toml entry needs file and pool keys");
      std::string rel = file_it->second.str;
      std::string pool = pool_it->second.str;
      auto face = font::FontFace::load((dir / rel).string());
      auto hit = seen.find(face.data_hash());
      if (hit != seen.end() && hit->second != pool)
        throw Error("font pools overlap: " + rel);
      seen[face.data_hash()] = pool;
      lib.pools_[pool].push_back(std::move(face));
    }
    return lib;
  }

  const std::vector<font::FontFace>& pool(const std::string& name) const {
    auto it = pools_.find(name);
    if (it == pools_.end() || it->second.empty())
      throw Error("font pool is empty: " + name);
    return it->second;
  }

  std::vector<std::string> pool_names() const {
    std::vector<std::string> names;
    for (const auto& [k, v] : pools_) names.push_back(k);
    return names;
  }

 private:
  std::map<std::string, std::vector<font::FontFace>> pools_;
};

namespace detail {

inline void blend_glyph(GrayImage& img, const font::GlyphRaster& g,
                        double pen_x, double pen_y, int ink) {
  int ox = static_cast<int>(std::lround(pen_x)) + g.left;
  int oy = static_cast<int>(std::lround(pen_y)) - g.top;
  for (int y = 0; y < g.height; ++y) {
    int iy = oy + y;
    if (iy < 0 || iy >= img.height) continue;
    for (int x = 0; x < g.width; ++x) {
      int ix = ox + x;
      if (ix < 0 || ix >= img.width) continue;
      int cov = g.coverage[static_cast<size_t>(y) * g.width + x];
      if (!cov) continue;
      u8& px = img.at(ix, iy);
      px = static_cast<u8>((px * (255 - cov) + ink * cov + 127) / 255);
    }
  }
}

inline Box glyph_box(const font::GlyphRaster& g, double pen_x, double pen_y) {
  Box b;
  b.x = static_cast<int>(std::lround(pen_x)) + g.left;
  b.y = static_cast<int>(std::lround(pen_y)) - g.top;
  b.w = g.width;
  b.h = g.height;
  return b;
}

inline void draw_blotch(GrayImage& img, Rng& rng, int bg, const GenParams& p) {
  double cx = rng.range_f(0, img.width);
  double cy = rng.range_f(0, img.height);
  double rx = rng.range_f(p.blotch_r_min, p.blotch_r_max);
  double ry = rng.range_f(p.blotch_r_min, p.blotch_r_max);
  int gray = std::clamp(
      bg + static_cast<int>(rng.range_i(-p.blotch_delta, p.blotch_delta)), 0, 255);
  int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
  int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + ry)));
  int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
  int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + rx)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) img.at(x, y) = static_cast<u8>(gray);
    }
}

// Axis-aligned hull of a source-space box after the content motion of
// `warp` (which maps output -> source), clipped to the canvas.
inline Box warped_box(const Box& src, const AffineTransform& warp, int w, int h) {
  AffineTransform fwd = warp.inverted();
  double xs[4], ys[4];
  const double cx[4] = {double(src.x), double(src.right()), double(src.x),
                        double(src.right())};
  const double cy[4] = {double(src.y), double(src.y), double(src.bottom()),
                        double(src.bottom())};
  for (int i = 0; i < 4; ++i) fwd.apply(cx[i], cy[i], xs[i], ys[i]);
  double xmin = *std::min_element(xs, xs + 4), xmax = *std::max_element(xs, xs + 4);
  double ymin = *std::min_element(ys, ys + 4), ymax = *std::max_element(ys, ys + 4);
  Box b;
  b.x = std::max(0, static_cast<int>(std::floor(xmin)));
  b.y = std::max(0, static_cast<int>(std::floor(ymin)));
  b.w = std::min(w, static_cast<int>(std::ceil(xmax))) - b.x;
  b.h = std::min(h, static_cast<int>(std::ceil(ymax))) - b.y;
  if (b.w < 1) b.w = 1;
  if (b.h < 1) b.h = 1;
  return b;
}

}  // namespace detail

// One 64x64 training patch: random background and blotches, the requested
// glyph centered, one random neighbor on each side at baseline, then a
// joint translate/rotate. Draw order is part of the determinism contract:
// background, blotches, font, size, ink, neighbor classes, gaps, warp.
inline CharSample render_char_sample(int cls,
                                     const std::vector<font::FontFace>& pool,
                                     const GenParams& p, u64 seed,
                                     RenderTrace* trace = nullptr) {
  validate_params(p);
  if (cls < 0 || cls >= charset::kNumClasses)
    throw Error("class id out of range");
  if (pool.empty()) throw Error("font pool is empty");
  Rng rng(seed);
  int side = p.side;
  int bg = static_cast<int>(rng.range_i(p.bg_min, p.bg_max));
  GrayImage canvas(side, side, static_cast<u8>(bg));
  int nblotch = static_cast<int>(rng.range_i(p.blotch_min, p.blotch_max));
  for (int i = 0; i < nblotch; ++i) detail::draw_blotch(canvas, rng, bg, p);
  const auto& face = pool[rng.below(pool.size())];
  double ppem = rng.range_f(p.size_min, p.size_max);
  int ink = static_cast<int>(rng.range_i(p.ink_min, p.ink_max));
  int left_cls = static_cast<int>(rng.below(charset::kNumClasses));
  int right_cls = static_cast<int>(rng.below(charset::kNumClasses));
  double gap_l = rng.range_f(p.gap_min, p.gap_max);
  double gap_r = rng.range_f(p.gap_min, p.gap_max);
  double rot = p.rot_deg > 0 ? rng.range_f(-p.rot_deg, p.rot_deg) : 0.0;
  double dx = p.trans_px > 0 ? rng.range_f(-p.trans_px, p.trans_px) : 0.0;
  double dy = p.trans_px > 0 ? rng.range_f(-p.trans_px, p.trans_px) : 0.0;

  auto g = face.rasterize(charset::codepoint_of(cls), ppem);
  double pen_x = side / 2.0 - g.left - g.width / 2.0;
  double pen_y = side / 2.0 + g.top - g.height / 2.0;
  auto gl = face.rasterize(charset::codepoint_of(left_cls), ppem);
  auto gr = face.rasterize(charset::codepoint_of(right_cls), ppem);
  detail::blend_glyph(canvas, gl, pen_x - gap_l - gl.advance, pen_y, ink);
  detail::blend_glyph(canvas, gr, pen_x + g.advance + gap_r, pen_y, ink);
  detail::blend_glyph(canvas, g, pen_x, pen_y, ink);

  auto warp = AffineTransform::translation(dx, dy)
                  .then(AffineTransform::rotation_about(rot, side / 2.0, side / 2.0));
  CharSample out;
  out.image = imaging::warp_affine(canvas, warp, static_cast<u8>(bg));
  out.label = cls;
  out.provenance = Provenance::synthetic;
  out.seed = seed;
  if (trace) {
    trace->left_class = left_cls;
    trace->right_class = right_cls;
    trace->center_box =
        detail::warped_box(detail::glyph_box(g, pen_x, pen_y), warp, side, side);
  }
  return out;
}

// Whole text field with ground-truth glyph boxes. Lines split on '\n',
// words on ' '. The same noise and affine model as the character renderer
// is applied once to the whole field.
inline TextFieldSample render_text_field(const std::string& text,
                                         const std::vector<font::FontFace>& pool,
                                         const GenParams& p, u64 seed) {
  validate_params(p);
  if (pool.empty()) throw Error("font pool is empty");
  auto cps = utf8_decode(text);
  if (cps.empty()) throw Error("empty field text");
  bool any_glyph = false;
  for (u32 cp : cps) {
    if (cp == ' ' || cp == '\n') continue;
    charset::class_of(cp);  // throws on foreign symbols
    any_glyph = true;
  }
  if (!any_glyph) throw Error("empty field text");

  Rng rng(seed);
  const auto& face = pool[rng.below(pool.size())];
  double ppem = rng.range_f(p.size_min, p.size_max);
  int ink = static_cast<int>(rng.range_i(p.ink_min, p.ink_max));
  int bg = static_cast<int>(rng.range_i(p.bg_min, p.bg_max));
  double letter_spacing = rng.range_f(1.0, 3.0);
  double word_gap = 4.0 * (letter_spacing + 3.0);

  std::map<u32, font::GlyphRaster> cache;
  auto glyph = [&](u32 cp) -> const font::GlyphRaster& {
    auto it = cache.find(cp);
    if (it == cache.end())
      it = cache.emplace(cp, face.rasterize(cp, ppem)).first;
    return it->second;
  };

  // layout pass: pen positions per glyph, line by line
  struct Placed {
    u32 cp;
    double pen_x, pen_y;
  };
  std::vector<Placed> placed;
  double ascent = face.ascent(ppem);
  double line_h = ascent - face.descent(ppem);
  double line_step = std::ceil(1.3 * line_h);
  const double margin = 12.0;
  double max_w = 0;
  int line_no = 0;
  double pen_x = margin;
  double baseline = margin + ascent;
  for (size_t i = 0; i <= cps.size(); ++i) {
    u32 cp = i < cps.size() ? cps[i] : u32('\n');
    if (cp == '\n') {
      max_w = std::max(max_w, pen_x);
      if (i + 1 <= cps.size() && i < cps.size()) {
        ++line_no;
        pen_x = margin;
        baseline = margin + ascent + line_no * line_step;
      }
      continue;
    }
    if (cp == ' ') {
      pen_x += word_gap;
      continue;
    }
    const auto& g = glyph(cp);
    placed.push_back({cp, pen_x, baseline});
    pen_x = pen_x + g.advance + letter_spacing;
  }
  int width = static_cast<int>(std::ceil(max_w + margin));
  int height =
      static_cast<int>(std::ceil(margin * 2 + line_h + line_no * line_step));

  GrayImage canvas(width, height, static_cast<u8>(bg));
  int nblotch = static_cast<int>(rng.range_i(p.blotch_min, p.blotch_max));
  for (int i = 0; i < nblotch; ++i) detail::draw_blotch(canvas, rng, bg, p);
  double rot = p.rot_deg > 0 ? rng.range_f(-p.rot_deg, p.rot_deg) : 0.0;
  double dx = p.trans_px > 0 ? rng.range_f(-p.trans_px, p.trans_px) : 0.0;
  double dy = p.trans_px > 0 ? rng.range_f(-p.trans_px, p.trans_px) : 0.0;

  std::vector<Box> src_boxes;
  for (const auto& pl : placed) {
    const auto& g = glyph(pl.cp);
    detail::blend_glyph(canvas, g, pl.pen_x, pl.pen_y, ink);
    src_boxes.push_back(detail::glyph_box(g, pl.pen_x, pl.pen_y));
  }
  auto warp = AffineTransform::translation(dx, dy)
                  .then(AffineTransform::rotation_about(rot, width / 2.0,
                                                        height / 2.0));
  TextFieldSample out;
  out.image = imaging::warp_affine(canvas, warp, static_cast<u8>(bg));
  out.text = text;
  for (const auto& b : src_boxes)
    out.boxes.push_back(detail::warped_box(b, warp, width, height));
  out.style = p;
  out.seed = seed;
  return out;
}

// ---------------------------------------------------------------------------
// Corpus files

struct CorpusSpec {
  std::vector<int> classes;                          // class ids
  std::vector<std::pair<std::string, int>> splits;   // name -> count per class
};

struct SampleRecord {
  std::string path;  // relative to corpus root
  int cls = -1;
  u64 seed = 0;
  Provenance provenance = Provenance::synthetic;
};

struct FieldSpec {
  std::string text;
  std::string rule;  // format rule id, may be empty
};

struct FieldRecord {
  std::string path;
  std::string text;
  std::vector<Box> boxes;
  u64 seed = 0;
  std::string style;
  std::string rule;
};

namespace detail {

inline void write_incomplete_marker(const std::string& manifest) {
  std::ofstream f(manifest, std::ios::trunc);
  f << "{\"incomplete\":true}\n";
}

inline std::ofstream open_complete_manifest(const std::string& manifest) {
  std::ofstream f(manifest, std::ios::trunc);
  if (!f) throw Error("cannot write manifest: " + manifest);
  return f;
}

}  // namespace detail

// Renders every (split, class, index) sample to PNG and writes
// manifest.jsonl. Per-sample seeds hash the master seed with the sample
// address, so one sample can be regenerated without the rest. A crashed
// run leaves the manifest holding only an incomplete marker.
inline std::string generate_corpus(const std::string& root,
                                   const CorpusSpec& spec,
                                   const std::vector<font::FontFace>& pool,
                                   const GenParams& params, u64 master_seed) {
  validate_params(params);
  namespace fs = std::filesystem;
  struct Job {
    std::string rel;
    std::string key;
    int cls;
    u64 seed;
  };
  std::vector<Job> jobs;
  for (const auto& [split, count] : spec.splits) {
    for (int cls : spec.classes) {
      fs::create_directories(fs::path(root) / split / std::to_string(cls));
      for (int idx = 0; idx < count; ++idx) {
        Job j;
        j.key = split + "/" + std::to_string(cls) + "/" + std::to_string(idx);
        j.rel = j.key + ".png";
        j.cls = cls;
        j.seed = derive_seed(master_seed, j.key);
        jobs.push_back(std::move(j));
      }
    }
  }
  std::string manifest = (fs::path(root) / "manifest.jsonl").string();
  detail::write_incomplete_marker(manifest);
  parallel_for(static_cast<i64>(jobs.size()), [&](i64 b, i64 e) {
    for (i64 i = b; i < e; ++i) {
      const Job& j = jobs[static_cast<size_t>(i)];
      auto sample = render_char_sample(j.cls, pool, params, j.seed);
      write_png((fs::path(root) / j.rel).string(), sample.image);
    }
  });
  auto f = detail::open_complete_manifest(manifest);
  for (const Job& j : jobs) {
    nlohmann::json line{{"path", j.rel},
                        {"class", j.cls},
                        {"seed", j.seed},
                        {"provenance", "synthetic"}};
    f << line.dump() << "\n";
  }
  return manifest;
}

inline std::string generate_field_corpus(const std::string& root,
                                         const std::vector<FieldSpec>& fields,
                                         const std::vector<font::FontFace>& pool,
                                         const GenParams& params,
                                         u64 master_seed) {
  validate_params(params);
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(root) / "fields");
  std::string manifest = (fs::path(root) / "fields.jsonl").string();
  detail::write_incomplete_marker(manifest);
  std::vector<TextFieldSample> rendered(fields.size());
  parallel_for(static_cast<i64>(fields.size()), [&](i64 b, i64 e) {
    for (i64 i = b; i < e; ++i) {
      u64 seed = derive_seed(master_seed, "fields/" + std::to_string(i));
      rendered[static_cast<size_t>(i)] =
          render_text_field(fields[static_cast<size_t>(i)].text, pool, params,
                            seed);
      write_png((fs::path(root) / "fields" / (std::to_string(i) + ".png")).string(),
                rendered[static_cast<size_t>(i)].image);
    }
  });
  auto f = detail::open_complete_manifest(manifest);
  for (size_t i = 0; i < fields.size(); ++i) {
    const auto& s = rendered[i];
    nlohmann::json boxes = nlohmann::json::array();
    for (const Box& b : s.boxes) boxes.push_back({b.x, b.y, b.w, b.h});
    nlohmann::json line{{"path", "fields/" + std::to_string(i) + ".png"},
                        {"text", s.text},
                        {"boxes", boxes},
                        {"seed", s.seed},
                        {"style", params.pool},
                        {"rule", fields[i].rule}};
    f << line.dump() << "\n";
  }
  return manifest;
}

namespace detail {

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open manifest: " + path);
  std::vector<nlohmann::json> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error("bad manifest line in " + path);
    if (j.contains("incomplete"))
      throw Error("corpus manifest incomplete: " + path);
    lines.push_back(std::move(j));
  }
  return lines;
}

}  // namespace detail

inline std::vector<SampleRecord> load_corpus_manifest(const std::string& root) {
  std::vector<SampleRecord> out;
  for (const auto& j :
       detail::read_jsonl((std::filesystem::path(root) / "manifest.jsonl").string())) {
    SampleRecord r;
    r.path = j.at("path").get<std::string>();
    r.cls = j.at("class").get<int>();
    r.seed = j.at("seed").get<u64>();
    r.provenance = provenance_from(j.at("provenance").get<std::string>());
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<FieldRecord> load_field_corpus(const std::string& root) {
  std::vector<FieldRecord> out;
  for (const auto& j :
       detail::read_jsonl((std::filesystem::path(root) / "fields.jsonl").string())) {
    FieldRecord r;
    r.path = j.at("path").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.seed = j.at("seed").get<u64>();
    r.style = j.value("style", std::string());
    r.rule = j.value("rule", std::string());
    for (const auto& b : j.at("boxes"))
      r.boxes.push_back(Box{b.at(0).get<int>(), b.at(1).get<int>(),
                            b.at(2).get<int>(), b.at(3).get<int>()});
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace idocr::synthgen
