#include "ajo/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "ajo/errors.hpp"
#include "text_util.hpp"

namespace ajo {

namespace {

constexpr std::array<const char*, kChannelCount> kChannelNames{"visual", "auditory", "touch", "taste", "smell"};

// Clockwise from north: P2..P9 in the usual thinning notation.
constexpr std::array<int, 8> kRingDx{0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::array<int, 8> kRingDy{-1, -1, 0, 1, 1, 1, 0, -1};

std::array<bool, 8> ring(const Bitmap& b, int x, int y) {
  std::array<bool, 8> p{};
  for (int k = 0; k < 8; ++k) p[static_cast<std::size_t>(k)] = b.get(x + kRingDx[static_cast<std::size_t>(k)], y + kRingDy[static_cast<std::size_t>(k)]);
  return p;
}

int transitions(const std::array<bool, 8>& p) {
  int a = 0;
  for (std::size_t k = 0; k < 8; ++k) a += !p[k] && p[(k + 1) % 8];
  return a;
}

// A cell is simple when removing it keeps one foreground 8-component and one
// background 4-component in its ring.
bool simple_point(const Bitmap& b, int x, int y) {
  const auto p = ring(b, x, y);
  std::array<int, 8> label{};
  label.fill(-1);
  int fg = 0;
  for (std::size_t s = 0; s < 8; ++s) {
    if (!p[s] || label[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    label[s] = fg;
    while (!stack.empty()) {
      const auto c = stack.back();
      stack.pop_back();
      for (std::size_t t = 0; t < 8; ++t) {
        if (!p[t] || label[t] >= 0) continue;
        const int dx = kRingDx[c] - kRingDx[t], dy = kRingDy[c] - kRingDy[t];
        if (std::abs(dx) <= 1 && std::abs(dy) <= 1) {
          label[t] = fg;
          stack.push_back(t);
        }
      }
    }
    ++fg;
  }
  if (fg != 1) return false;
  // background: ring positions are a cycle; 4-adjacent steps are consecutive
  // positions where one is a side cell (even index).
  label.fill(-1);
  int bg = 0;
  for (std::size_t s = 0; s < 8; s += 2) {
    if (p[s] || label[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    label[s] = bg;
    while (!stack.empty()) {
      const auto c = stack.back();
      stack.pop_back();
      for (std::size_t t : {(c + 1) % 8, (c + 7) % 8}) {
        if (p[t] || label[t] >= 0) continue;
        if (c % 2 == 0 || t % 2 == 0) {
          label[t] = bg;
          stack.push_back(t);
        }
      }
    }
    ++bg;
  }
  return bg == 1;
}

Bitmap zhang_suen(Bitmap b) {
  bool changed = true;
  std::vector<std::size_t> doomed;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (int y = 0; y < b.height; ++y)
        for (int x = 0; x < b.width; ++x) {
          if (!b.get(x, y)) continue;
          const auto p = ring(b, x, y);
          const int n = static_cast<int>(std::count(p.begin(), p.end(), true));
          if (n < 2 || n > 6 || transitions(p) != 1) continue;
          const bool n2 = p[0], n4 = p[2], n6 = p[4], n8 = p[6];
          if (pass == 0 ? (n2 && n4 && n6) || (n4 && n6 && n8) : (n2 && n4 && n8) || (n2 && n6 && n8)) continue;
          doomed.push_back(static_cast<std::size_t>(y * b.width + x));
        }
      for (auto i : doomed) b.bits[i] = 0;
      changed = changed || !doomed.empty();
    }
  }
  return b;
}

}  // namespace

const char* to_string(Channel c) { return kChannelNames[static_cast<std::size_t>(c)]; }

Channel parse_channel(const std::string& token) {
  for (std::size_t i = 0; i < kChannelNames.size(); ++i)
    if (token == kChannelNames[i]) return static_cast<Channel>(i);
  throw PreconditionError("unknown channel '" + token + "'");
}

GridImage::GridImage(int width, int height, double fill, Channel channel)
    : GridImage(width, height, std::vector<double>(static_cast<std::size_t>(std::max(0, width) * std::max(0, height)), fill),
                channel) {}

GridImage::GridImage(int width, int height, std::vector<double> values, Channel channel)
    : width_(width), height_(height), values_(std::move(values)), channel_(channel) {
  if (width < 1 || height < 1) throw EmptyImageError("image must be at least 1x1");
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw PreconditionError("image value count does not match its size");
  for (double v : values_)
    if (!(v >= 0.0 && v <= 1.0)) throw RangeError("image intensity outside [0, 1]");
}

void GridImage::set(int x, int y, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw RangeError("image intensity outside [0, 1]");
  values_.at(index(x, y)) = v;
}

std::size_t Bitmap::count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

std::vector<Cell> Bitmap::cells() const {
  std::vector<Cell> out;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (get(x, y)) out.push_back({x, y});
  return out;
}

Bitmap binarize(const GridImage& image, double threshold) {
  Bitmap b(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) b.set(x, y, image.at(x, y) >= threshold);
  return b;
}

GridImage to_image(const Bitmap& bitmap, Channel channel) {
  std::vector<double> v(bitmap.bits.begin(), bitmap.bits.end());
  return GridImage(bitmap.width, bitmap.height, std::move(v), channel);
}

Bitmap from_cells(int width, int height, std::span<const Cell> cells) {
  Bitmap b(width, height);
  for (auto c : cells) b.set(c);
  return b;
}

std::vector<Cell> neighbours(Cell c, Connectivity conn, int anchor_row) {
  switch (conn) {
    case Connectivity::four:
      return {{c.x, c.y - 1}, {c.x - 1, c.y}, {c.x + 1, c.y}, {c.x, c.y + 1}};
    case Connectivity::eight:
      return {{c.x - 1, c.y - 1}, {c.x, c.y - 1}, {c.x + 1, c.y - 1}, {c.x - 1, c.y},
              {c.x + 1, c.y},     {c.x - 1, c.y + 1}, {c.x, c.y + 1}, {c.x + 1, c.y + 1}};
    case Connectivity::hex6: {
      const bool odd = ((c.y - anchor_row) % 2 + 2) % 2 == 1;
      const int s = odd ? 0 : -1;
      return {{c.x + s, c.y - 1}, {c.x + s + 1, c.y - 1}, {c.x - 1, c.y},
              {c.x + 1, c.y},     {c.x + s, c.y + 1},     {c.x + s + 1, c.y + 1}};
    }
  }
  return {};
}

std::vector<std::vector<Cell>> components(const Bitmap& bitmap, Connectivity conn, int anchor_row) {
  std::vector<std::vector<Cell>> out;
  std::vector<std::uint8_t> seen(bitmap.bits.size(), 0);
  for (int y = 0; y < bitmap.height; ++y)
    for (int x = 0; x < bitmap.width; ++x) {
      if (!bitmap.get(x, y) || seen[static_cast<std::size_t>(y * bitmap.width + x)]) continue;
      std::vector<Cell> comp;
      std::deque<Cell> queue{{x, y}};
      seen[static_cast<std::size_t>(y * bitmap.width + x)] = 1;
      while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        comp.push_back(c);
        for (const Cell n : neighbours(c, conn, anchor_row)) {
          if (!bitmap.get(n)) continue;
          auto& s = seen[static_cast<std::size_t>(n.y * bitmap.width + n.x)];
          if (s) continue;
          s = 1;
          queue.push_back(n);
        }
      }
      std::sort(comp.begin(), comp.end(), [](Cell a, Cell b) { return a.y < b.y || (a.y == b.y && a.x < b.x); });
      out.push_back(std::move(comp));
    }
  return out;
}

int neighbour_count(const Bitmap& b, int x, int y) {
  const auto p = ring(b, x, y);
  return static_cast<int>(std::count(p.begin(), p.end(), true));
}

int crossing_number(const Bitmap& b, int x, int y) { return transitions(ring(b, x, y)); }

bool is_junction(const Bitmap& b, int x, int y) {
  return b.get(x, y) && neighbour_count(b, x, y) >= 3 && crossing_number(b, x, y) >= 3;
}

bool is_endpoint(const Bitmap& b, int x, int y) {
  if (!b.get(x, y)) return false;
  const int n = neighbour_count(b, x, y);
  return n == 1 || (n == 2 && crossing_number(b, x, y) == 1);
}

Bitmap thin(const Bitmap& bitmap) {
  Bitmap b = zhang_suen(bitmap);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y < b.height; ++y)
      for (int x = 0; x < b.width; ++x) {
        if (!b.get(x, y) || neighbour_count(b, x, y) < 2) continue;
        if (is_endpoint(b, x, y)) continue;
        if (simple_point(b, x, y)) {
          b.set(x, y, false);
          changed = true;
        }
      }
  }
  return b;
}

Bitmap prune_spurs(const Bitmap& skeleton, int max_length) {
  Bitmap out = skeleton;
  for (int y = 0; y < skeleton.height; ++y)
    for (int x = 0; x < skeleton.width; ++x) {
      if (!is_endpoint(skeleton, x, y)) continue;
      std::vector<Cell> path{{x, y}};
      bool reached_junction = false;
      while (static_cast<int>(path.size()) <= max_length) {
        const Cell cur = path.back();
        std::vector<Cell> next;
        bool junction = false;
        for (const Cell n : neighbours(cur, Connectivity::eight)) {
          if (!skeleton.get(n) || std::find(path.begin(), path.end(), n) != path.end()) continue;
          if (is_junction(skeleton, n.x, n.y)) junction = true;
          next.push_back(n);
        }
        if (junction) {
          reached_junction = true;
          break;
        }
        if (next.size() != 1) break;
        path.push_back(next.front());
      }
      if (reached_junction && static_cast<int>(path.size()) <= max_length)
        for (auto c : path) out.set(c, false);
    }
  return out;
}

Bitmap skeletonize(const Bitmap& bitmap, int spur_length) {
  Bitmap s = thin(bitmap);
  if (spur_length > 0) s = thin(prune_spurs(s, spur_length));
  return s;
}

Bitmap dilate(const Bitmap& bitmap, int radius) {
  Bitmap out(bitmap.width, bitmap.height);
  for (int y = 0; y < bitmap.height; ++y)
    for (int x = 0; x < bitmap.width; ++x) {
      if (!bitmap.get(x, y)) continue;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) out.set(x + dx, y + dy);
    }
  return out;
}

Bitmap outline(const Bitmap& bitmap) {
  Bitmap out(bitmap.width, bitmap.height);
  for (int y = 0; y < bitmap.height; ++y)
    for (int x = 0; x < bitmap.width; ++x)
      if (bitmap.get(x, y) && (!bitmap.get(x - 1, y) || !bitmap.get(x + 1, y) || !bitmap.get(x, y - 1) || !bitmap.get(x, y + 1)))
        out.set(x, y);
  return out;
}

Bitmap outline_solids(const Bitmap& bitmap, int solid_width) {
  const int r = solid_width / 2;
  auto solid_at = [&](Cell c) {
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        if (!bitmap.get(c.x + dx, c.y + dy)) return false;
    return true;
  };
  const Bitmap edge = outline(bitmap);
  Bitmap out = bitmap;
  for (const auto& comp : components(bitmap, Connectivity::eight)) {
    if (std::none_of(comp.begin(), comp.end(), solid_at)) continue;
    for (auto c : comp) out.set(c, edge.get(c));
  }
  return out;
}

GridImage box_blur(const GridImage& image, int radius) {
  const double norm = 1.0 / static_cast<double>((2 * radius + 1) * (2 * radius + 1));
  GridImage out(image.width(), image.height(), 0.0, image.channel());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      double s = 0.0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          if (image.inside(x + dx, y + dy)) s += image.at(x + dx, y + dy);
      out.set(x, y, std::clamp(s * norm, 0.0, 1.0));
    }
  return out;
}

std::vector<Cell> line_cells(Cell from, Cell to) {
  std::vector<Cell> out;
  int x = from.x, y = from.y;
  const int dx = std::abs(to.x - from.x), dy = -std::abs(to.y - from.y);
  const int sx = from.x < to.x ? 1 : -1, sy = from.y < to.y ? 1 : -1;
  int err = dx + dy;
  while (true) {
    out.push_back({x, y});
    if (x == to.x && y == to.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  return out;
}

void draw_line(Bitmap& b, Cell from, Cell to) {
  for (auto c : line_cells(from, to)) b.set(c);
}

void draw_circle(Bitmap& b, double cx, double cy, double radius) {
  const int n = std::max(16, static_cast<int>(std::ceil(2.0 * std::numbers::pi * radius * 4.0)));
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    b.set(static_cast<int>(std::lround(cx + radius * std::cos(a))), static_cast<int>(std::lround(cy + radius * std::sin(a))));
  }
}

GridImage read_pgm(std::istream& in) {
  std::vector<std::string> tokens;
  std::vector<int> token_line;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (auto& t : detail::split_ws(line)) {
      tokens.push_back(t);
      token_line.push_back(lineno);
    }
  }
  if (tokens.empty() || tokens[0] != "P2") throw ParseError(1, "expected ASCII PGM header 'P2'");
  if (tokens.size() < 4) throw ParseError(lineno, "truncated PGM header");
  auto number = [&](std::size_t i) {
    auto v = detail::parse_int(tokens[i]);
    if (!v || *v < 0) throw ParseError(token_line[i], "bad PGM number '" + tokens[i] + "'");
    return *v;
  };
  const int w = number(1), h = number(2), maxval = number(3);
  if (maxval < 1) throw ParseError(token_line[3], "PGM maxval must be >= 1");
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (tokens.size() != 4 + n) throw ParseError(lineno, "PGM holds " + std::to_string(tokens.size() - 4) + " samples, expected " + std::to_string(n));
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int s = number(4 + i);
    if (s > maxval) throw ParseError(token_line[4 + i], "PGM sample exceeds maxval");
    v[i] = static_cast<double>(s) / maxval;
  }
  return GridImage(w, h, std::move(v));
}

void write_pgm(std::ostream& out, const GridImage& image, int maxval) {
  out << "P2\n" << image.width() << ' ' << image.height() << '\n' << maxval << '\n';
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x)
      out << (x ? " " : "") << std::lround(image.at(x, y) * maxval);
    out << '\n';
  }
}

GridImage read_text_grid(std::istream& in) {
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == '#') continue;
    rows.push_back(line);
  }
  while (!rows.empty() && detail::trim(rows.back()).empty()) rows.pop_back();
  if (rows.empty()) throw EmptyImageError("text grid has no rows");
  std::size_t w = 0;
  for (const auto& r : rows) w = std::max(w, r.size());
  if (w == 0) throw EmptyImageError("text grid has no columns");
  std::vector<double> v(w * rows.size(), 0.0);
  for (std::size_t y = 0; y < rows.size(); ++y)
    for (std::size_t x = 0; x < rows[y].size(); ++x) {
      const char c = rows[y][x];
      if (c >= '0' && c <= '9')
        v[y * w + x] = (c - '0') / 9.0;
      else if (c != '.' && c != ' ')
        throw ParseError(static_cast<int>(y + 1), std::string("unexpected character '") + c + "' in text grid");
    }
  return GridImage(static_cast<int>(w), static_cast<int>(rows.size()), std::move(v));
}

void write_text_grid(std::ostream& out, const GridImage& image) {
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) out << static_cast<char>('0' + std::lround(image.at(x, y) * 9.0));
    out << '\n';
  }
}

GridImage load_image(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open image '" + path + "'");
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  in.seekg(0);
  return magic == "P2" ? read_pgm(in) : read_text_grid(in);
}

}  // namespace ajo
