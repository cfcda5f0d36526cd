#include <algorithm>
#include <cmath>
#include <deque>

#include "ajo/errors.hpp"
#include "ajo/fractal_decomposition.hpp"

namespace ajo {

const char* to_string(Geometry g) { return g == Geometry::rectangular ? "rectangular" : "hexagonal"; }

std::vector<int> Cube::region_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(region_count), 0);
  for (int r : fused) ++sizes[static_cast<std::size_t>(r)];
  return sizes;
}

int Cube::multi_cell_regions() const {
  const auto sizes = region_sizes();
  return static_cast<int>(std::count_if(sizes.begin(), sizes.end(), [](int s) { return s > 1; }));
}

GridImage resample(const GridImage& image, int width, int height) {
  if (image.empty()) throw EmptyImageError("cannot resample an empty image");
  if (width == image.width() && height == image.height()) return image;
  GridImage out(width, height, 0.0, image.channel());
  const double sx = static_cast<double>(image.width()) / width;
  const double sy = static_cast<double>(image.height()) / height;
  for (int ty = 0; ty < height; ++ty)
    for (int tx = 0; tx < width; ++tx) {
      const double x0 = tx * sx, x1 = (tx + 1) * sx, y0 = ty * sy, y1 = (ty + 1) * sy;
      double sum = 0.0, area = 0.0;
      for (int y = static_cast<int>(std::floor(y0)); y < static_cast<int>(std::ceil(y1)); ++y)
        for (int x = static_cast<int>(std::floor(x0)); x < static_cast<int>(std::ceil(x1)); ++x) {
          const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
          if (wx <= 0.0 || wy <= 0.0) continue;
          sum += wx * wy * image.at(x, y);
          area += wx * wy;
        }
      out.set(tx, ty, std::clamp(sum / area, 0.0, 1.0));
    }
  return out;
}

std::vector<int> fuse_cells(const GridImage& layer, Geometry geometry, double tolerance) {
  const int w = layer.width(), h = layer.height();
  std::vector<int> label(static_cast<std::size_t>(w * h), -1);
  const auto conn = geometry == Geometry::rectangular ? Connectivity::four : Connectivity::hex6;
  int next = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (label[static_cast<std::size_t>(y * w + x)] >= 0) continue;
      const double seed = layer.at(x, y);
      std::deque<Cell> queue{{x, y}};
      label[static_cast<std::size_t>(y * w + x)] = next;
      while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        for (const Cell n : neighbours(c, conn)) {
          if (!layer.inside(n.x, n.y)) continue;
          auto& l = label[static_cast<std::size_t>(n.y * w + n.x)];
          if (l >= 0 || std::abs(layer.at(n.x, n.y) - seed) > tolerance) continue;
          l = next;
          queue.push_back(n);
        }
      }
      ++next;
    }
  return label;
}

Cube build_cube(const GridImage& image, Geometry geometry, double tolerance) {
  if (image.empty()) throw EmptyImageError("cannot build a cube from an empty image");
  Cube cube;
  cube.geometry = geometry;
  cube.layers[0] = resample(image, kCubeSide, kCubeSide);
  for (std::size_t k = 1; k < cube.layers.size(); ++k) {
    const auto& below = cube.layers[k - 1];
    const int side = below.width() / 2;
    GridImage up(side, side, 0.0, image.channel());
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        up.set(x, y,
               (below.at(2 * x, 2 * y) + below.at(2 * x + 1, 2 * y) + below.at(2 * x, 2 * y + 1) +
                below.at(2 * x + 1, 2 * y + 1)) /
                   4.0);
    cube.layers[k] = std::move(up);
  }
  cube.fused = fuse_cells(cube.layers[0], geometry, tolerance);
  cube.region_count = cube.fused.empty() ? 0 : *std::max_element(cube.fused.begin(), cube.fused.end()) + 1;
  return cube;
}

std::pair<Cube, Cube> build_dual(const GridImage& image, double tolerance) {
  return {build_cube(image, Geometry::rectangular, tolerance), build_cube(image, Geometry::hexagonal, tolerance)};
}

CubeGrid build_cube_grid(const GridImage& image, Geometry geometry, double tolerance) {
  if (image.empty()) throw EmptyImageError("cannot build cubes from an empty image");
  CubeGrid grid;
  grid.columns = (image.width() + kCubeSide - 1) / kCubeSide;
  grid.rows = (image.height() + kCubeSide - 1) / kCubeSide;
  for (int ty = 0; ty < grid.rows; ++ty)
    for (int tx = 0; tx < grid.columns; ++tx) {
      GridImage tile(kCubeSide, kCubeSide, 0.0, image.channel());
      for (int y = 0; y < kCubeSide; ++y)
        for (int x = 0; x < kCubeSide; ++x) {
          const int sx = tx * kCubeSide + x, sy = ty * kCubeSide + y;
          if (image.inside(sx, sy)) tile.set(x, y, image.at(sx, sy));
        }
      grid.cubes.push_back(build_cube(tile, geometry, tolerance));
      const int id = ty * grid.columns + tx;
      if (tx > 0) grid.adjacent.emplace_back(id - 1, id);
      if (ty > 0) grid.adjacent.emplace_back(id - grid.columns, id);
    }
  return grid;
}

NeighbourhoodCounts neighbourhood_counts(const Bitmap& b, Cell c, int anchor_row) {
  NeighbourhoodCounts n;
  for (auto q : neighbours(c, Connectivity::four)) n.von_neumann += b.get(q);
  for (auto q : neighbours(c, Connectivity::eight)) n.moore += b.get(q);
  for (auto q : neighbours(c, Connectivity::hex6, anchor_row)) n.hex6 += b.get(q);
  return n;
}

}  // namespace ajo
