#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ajo {

enum class Channel { visual, auditory, touch, taste, smell };

const char* to_string(Channel c);
Channel parse_channel(const std::string& token);
inline constexpr int kChannelCount = 5;

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

// Intensity grid, values in [0,1], row-major.
class GridImage {
 public:
  GridImage() = default;
  GridImage(int width, int height, double fill = 0.0, Channel channel = Channel::visual);
  GridImage(int width, int height, std::vector<double> values, Channel channel = Channel::visual);

  int width() const { return width_; }
  int height() const { return height_; }
  Channel channel() const { return channel_; }
  void set_channel(Channel c) { channel_ = c; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  double at(int x, int y) const { return values_[index(x, y)]; }
  void set(int x, int y, double v);
  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const GridImage&) const = default;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x); }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
  Channel channel_ = Channel::visual;
};

// Binary raster used by the morphology stages.
struct Bitmap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Bitmap() = default;
  Bitmap(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  bool get(int x, int y) const { return inside(x, y) && bits[static_cast<std::size_t>(y * width + x)] != 0; }
  bool get(Cell c) const { return get(c.x, c.y); }
  void set(int x, int y, bool v = true) {
    if (inside(x, y)) bits[static_cast<std::size_t>(y * width + x)] = v ? 1 : 0;
  }
  void set(Cell c, bool v = true) { set(c.x, c.y, v); }
  std::size_t count() const;
  std::vector<Cell> cells() const;  // scan order
  bool operator==(const Bitmap&) const = default;
};

inline constexpr double kBinarizeThreshold = 0.5;

Bitmap binarize(const GridImage& image, double threshold = kBinarizeThreshold);
GridImage to_image(const Bitmap& bitmap, Channel channel = Channel::visual);
Bitmap from_cells(int width, int height, std::span<const Cell> cells);

enum class Connectivity { four, eight, hex6 };

// hex6 uses offset rows; rows with (y - anchor_row) even shift left.
std::vector<Cell> neighbours(Cell c, Connectivity conn, int anchor_row = 0);

// Components in scan order of their first cell; each component sorted.
std::vector<std::vector<Cell>> components(const Bitmap& bitmap, Connectivity conn, int anchor_row = 0);

int neighbour_count(const Bitmap& b, int x, int y);
// Number of 0 -> 1 transitions walking the 8 neighbours clockwise.
int crossing_number(const Bitmap& b, int x, int y);
bool is_junction(const Bitmap& b, int x, int y);
bool is_endpoint(const Bitmap& b, int x, int y);

Bitmap thin(const Bitmap& bitmap);  // Zhang-Suen, then removal of redundant staircase cells
Bitmap prune_spurs(const Bitmap& skeleton, int max_length);
Bitmap skeletonize(const Bitmap& bitmap, int spur_length = 2);
Bitmap dilate(const Bitmap& bitmap, int radius = 1);
Bitmap outline(const Bitmap& bitmap);  // cells with a 4-neighbour in the background
Bitmap outline_solids(const Bitmap& bitmap, int solid_width = 5);

GridImage box_blur(const GridImage& image, int radius);
void draw_line(Bitmap& b, Cell from, Cell to);
std::vector<Cell> line_cells(Cell from, Cell to);
void draw_circle(Bitmap& b, double cx, double cy, double radius);

// ASCII PGM (P2).
GridImage read_pgm(std::istream& in);
void write_pgm(std::ostream& out, const GridImage& image, int maxval = 255);
// One row per line, digits 0-9 mapped to value / 9; '.' and ' ' read as 0.
GridImage read_text_grid(std::istream& in);
void write_text_grid(std::ostream& out, const GridImage& image);
GridImage load_image(const std::string& path);

}  // namespace ajo
