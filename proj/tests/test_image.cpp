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
// File: tests/test_image.cpp
// Purpose: image container, affine algebra, boxes, PNG round trip
//
// AffineTransform maps output pixel coordinates to source coordinates;
// factory arguments describe content motion. The tests below check both
// views: sampling formulas directly, and content motion via inverted().

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "idocr/image.hpp"
#include "idocr/image_io.hpp"
#include "idocr/rng.hpp"

using namespace idocr;
using Catch::Approx;

namespace {

GrayImage random_image(int w, int h, u64 seed) {
  GrayImage img(w, h);
  Rng rng(seed);
  for (auto& p : img.data) p = static_cast<u8>(rng.below(256));
  return img;
}

struct Pt {
  double x, y;
};

Pt sample(const AffineTransform& t, double x, double y) {
  Pt p{};
  t.apply(x, y, p.x, p.y);
  return p;
}

// Independent 2x3 matrix oracle for composition checks.
struct Mat {
  double a, b, c, d, e, f;  // x' = a x + b y + c ; y' = d x + e y + f
};

Mat compose(const Mat& outer, const Mat& inner) {
  return Mat{outer.a * inner.a + outer.b * inner.d,
             outer.a * inner.b + outer.b * inner.e,
             outer.a * inner.c + outer.b * inner.f + outer.c,
             outer.d * inner.a + outer.e * inner.d,
             outer.d * inner.b + outer.e * inner.e,
             outer.d * inner.c + outer.e * inner.f + outer.f};
}

Mat as_mat(const AffineTransform& t) {
  Pt o = sample(t, 0, 0), ex = sample(t, 1, 0), ey = sample(t, 0, 1);
  return Mat{ex.x - o.x, ey.x - o.x, o.x, ex.y - o.y, ey.y - o.y, o.y};
}

}  // namespace

TEST_CASE("translation samples backwards so content moves forwards") {
  auto t = AffineTransform::translation(3, -2);
  Pt p = sample(t, 1, 1);
  REQUIRE(p.x == Approx(-2));
  REQUIRE(p.y == Approx(3));
  // content view: the source pixel (1,1) lands at (4,-1)
  Pt fwd = sample(t.inverted(), 1, 1);
  REQUIRE(fwd.x == Approx(4));
  REQUIRE(fwd.y == Approx(-1));
}

TEST_CASE("rotation keeps its center fixed and preserves distances") {
  auto r = AffineTransform::rotation_about(90.0, 2, 5);
  Pt c = sample(r, 2, 5);
  REQUIRE(c.x == Approx(2).margin(1e-9));
  REQUIRE(c.y == Approx(5).margin(1e-9));
  Pt p = sample(r, 7, 5);
  double dist = std::hypot(p.x - 2, p.y - 5);
  REQUIRE(dist == Approx(5).margin(1e-9));
  REQUIRE(r.det() == Approx(1));
}

TEST_CASE("scaling contracts the sampling grid to grow content") {
  auto s = AffineTransform::scale_about(2.0, 1, 1);
  Pt c = sample(s, 1, 1);
  REQUIRE(c.x == Approx(1));
  REQUIRE(c.y == Approx(1));
  Pt p = sample(s, 3, 1);  // 2 right of center -> 1 right of center
  REQUIRE(p.x == Approx(2));
  REQUIRE(p.y == Approx(1));
  REQUIRE(s.det() == Approx(0.25));  // sampling area shrinks by s^2
}

TEST_CASE("then composes like matrix multiplication") {
  Rng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    auto t1 = AffineTransform::rotation_about(rng.range_f(-60, 60),
                                              rng.range_f(-5, 5),
                                              rng.range_f(-5, 5));
    auto t2 = AffineTransform::scale_about(rng.range_f(0.5, 2),
                                           rng.range_f(-5, 5),
                                           rng.range_f(-5, 5));
    auto t3 = AffineTransform::translation(rng.range_f(-4, 4),
                                           rng.range_f(-4, 4));
    auto chained = t1.then(t2).then(t3);
    Mat oracle = compose(as_mat(t3), compose(as_mat(t2), as_mat(t1)));
    double px = rng.range_f(-10, 10), py = rng.range_f(-10, 10);
    Pt got = sample(chained, px, py);
    REQUIRE(got.x == Approx(oracle.a * px + oracle.b * py + oracle.c).margin(1e-9));
    REQUIRE(got.y == Approx(oracle.d * px + oracle.e * py + oracle.f).margin(1e-9));
  }
}

TEST_CASE("inverted undoes the transform") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    auto t = AffineTransform::rotation_about(rng.range_f(-120, 120), 3, 4)
                 .then(AffineTransform::scale_about(rng.range_f(0.3, 3), 1, 2))
                 .then(AffineTransform::translation(rng.range_f(-9, 9),
                                                    rng.range_f(-9, 9)));
    auto inv = t.inverted();
    double px = rng.range_f(-20, 20), py = rng.range_f(-20, 20);
    Pt mid = sample(t, px, py);
    Pt back = sample(inv, mid.x, mid.y);
    REQUIRE(back.x == Approx(px).margin(1e-7));
    REQUIRE(back.y == Approx(py).margin(1e-7));
  }
  AffineTransform degenerate;
  degenerate.a = degenerate.d = 0;
  REQUIRE_THROWS_AS(degenerate.inverted(), Error);
}

TEST_CASE("box edges, containment, intersection, and merge") {
  Box b{2, 3, 4, 5};
  REQUIRE(b.right() == 6);
  REQUIRE(b.bottom() == 8);
  REQUIRE(b.contains(Box{3, 4, 2, 2}));
  REQUIRE(!b.contains(Box{3, 4, 9, 2}));
  Box c{5, 7, 2, 2};
  Box m = b.merge(c);
  REQUIRE(m.x == 2);
  REQUIRE(m.y == 3);
  REQUIRE(m.right() == 7);
  REQUIRE(m.bottom() == 9);
  Box i = b.intersect(c);
  REQUIRE(i.w == 1);
  REQUIRE(i.h == 1);
  Box none = b.intersect(Box{100, 100, 2, 2});
  REQUIRE(none.w == 0);
}

TEST_CASE("crop copies the exact subrectangle") {
  GrayImage img = random_image(20, 10, 3);
  Box b{4, 2, 6, 5};
  GrayImage c = crop(img, b);
  REQUIRE(c.width == 6);
  REQUIRE(c.height == 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) REQUIRE(c.at(x, y) == img.at(4 + x, 2 + y));
  REQUIRE_THROWS_AS(crop(img, Box{18, 0, 5, 5}), Error);
}

TEST_CASE("in_bounds and at agree with manual indexing") {
  GrayImage img = random_image(7, 4, 11);
  REQUIRE(img.in_bounds(0, 0));
  REQUIRE(img.in_bounds(6, 3));
  REQUIRE(!img.in_bounds(7, 0));
  REQUIRE(!img.in_bounds(0, -1));
  REQUIRE(img.at(5, 2) == img.data[2 * 7 + 5]);
}

TEST_CASE("png write/read round trip preserves every pixel") {
  auto dir = std::filesystem::temp_directory_path() / "idocr_png_test";
  std::filesystem::create_directories(dir);
  GrayImage img = random_image(33, 17, 99);
  auto path = (dir / "rt.png").string();
  write_png(path, img);
  GrayImage back = read_png(path);
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  REQUIRE(back.data == img.data);
  std::filesystem::remove_all(dir);
}

TEST_CASE("png reader rejects missing files") {
  REQUIRE_THROWS_AS(read_png("/nonexistent/nope.png"), Error);
}
