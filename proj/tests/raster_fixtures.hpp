#pragma once

// Shape rasters drawn without the library's own drawing helpers, so the
// classifier and decomposition are tested against an independent rendering.

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <set>
#include <vector>

#include "ajo/fractal_decomposition.hpp"

namespace testfx {

using CellSet = std::set<ajo::Cell>;

inline void bresenham(CellSet& s, int x0, int y0, int x1, int y1) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    s.insert({x0, y0});
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) { err += dy; x0 += sx; }
    if (e2 <= dx) { err += dx; y0 += sy; }
  }
}

// Midpoint circle restricted to polar angles [a0, a1] degrees (wrapping if a0 > a1).
inline void midpoint_arc(CellSet& s, int cx, int cy, int r, double a0, double a1) {
  auto put = [&](int dx, int dy) {
    double a = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
    if (a < 0) a += 360.0;
    const bool in = a0 <= a1 ? (a >= a0 - 1e-9 && a <= a1 + 1e-9) : (a >= a0 || a <= a1);
    if (in) s.insert({cx + dx, cy + dy});
  };
  int x = r, y = 0, err = 1 - r;
  while (x >= y) {
    put(x, y); put(y, x); put(-y, x); put(-x, y);
    put(-x, -y); put(-y, -x); put(y, -x); put(x, -y);
    ++y;
    if (err < 0) {
      err += 2 * y + 1;
    } else {
      --x;
      err += 2 * (y - x) + 1;
    }
  }
}

inline int iround(double v) { return static_cast<int>(std::lround(v)); }

// One raster per primitive kind (index order of PrimitiveKind), centred at (c, c).
inline std::vector<ajo::Cell> primitive_raster(ajo::PrimitiveKind kind, int c, int sc) {
  using K = ajo::PrimitiveKind;
  const double deg = std::numbers::pi / 180.0;
  CellSet s;
  switch (kind) {
    case K::triangle: {
      int px[3], py[3];
      const double a[3] = {-90, 30, 150};
      for (int i = 0; i < 3; ++i) {
        px[i] = iround(c + sc * std::cos(a[i] * deg));
        py[i] = iround(c + sc * std::sin(a[i] * deg));
      }
      for (int i = 0; i < 3; ++i) bresenham(s, px[i], py[i], px[(i + 1) % 3], py[(i + 1) % 3]);
      break;
    }
    case K::circle: midpoint_arc(s, c, c, sc, 0, 360); break;
    case K::square:
      bresenham(s, c - sc, c - sc, c + sc, c - sc);
      bresenham(s, c + sc, c - sc, c + sc, c + sc);
      bresenham(s, c + sc, c + sc, c - sc, c + sc);
      bresenham(s, c - sc, c + sc, c - sc, c - sc);
      break;
    case K::open_triangle: {
      const int bx = iround(sc * std::cos(30 * deg)), by = iround(c + sc * std::sin(30 * deg));
      bresenham(s, c, c - sc, c + bx, by);
      bresenham(s, c, c - sc, c - bx, by);
      break;
    }
    case K::open_rectangle:
      bresenham(s, c - sc, c - sc, c - sc, c + sc);
      bresenham(s, c - sc, c + sc, c + sc, c + sc);
      bresenham(s, c + sc, c + sc, c + sc, c - sc);
      break;
    case K::open_circle_1: midpoint_arc(s, c, c, sc, 45, 135); break;
    case K::open_circle_2: midpoint_arc(s, c, c, sc, 0, 180); break;
    case K::open_circle_3: midpoint_arc(s, c, c, sc, 45, 315); break;
    case K::straight_line: bresenham(s, c - sc, c - 3, c + sc, c + 3); break;
    case K::junction:
      bresenham(s, c - sc, c, c + sc, c);
      bresenham(s, c, c - sc, c, c + sc);
      break;
  }
  return {s.begin(), s.end()};
}

inline ajo::GridImage raster_image(int w, int h, const CellSet& s) {
  ajo::GridImage img(w, h, 0.0);
  for (auto c : s)
    if (img.inside(c.x, c.y)) img.set(c.x, c.y, 1.0);
  return img;
}

inline ajo::GridImage raster_image(int w, int h, const std::vector<ajo::Cell>& v) {
  return raster_image(w, h, CellSet(v.begin(), v.end()));
}

}  // namespace testfx
