#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "ajo/errors.hpp"
#include "ajo/fractal_decomposition.hpp"

namespace ajo {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDegree = kPi / 180.0;
constexpr double kSampleStep = 0.005;  // unit-template arclength between samples
constexpr std::array<double, 5> kAspects{1.0, 1.5, 2.0, 2.5, 3.0};
constexpr std::array<double, 5> kScaleFactors{0.8, 0.9, 1.0, 1.1, 1.2};
constexpr double kRotationStep = 5.0 * kDegree;

constexpr std::array<const char*, kPrimitiveCount> kKindNames{
    "triangle",      "circle",        "square",        "open-triangle", "open-rectangle",
    "open-circle-1", "open-circle-2", "open-circle-3", "straight-line", "junction"};

struct P {
  double x = 0.0;
  double y = 0.0;
};

struct Shape {
  PrimitiveKind kind;
  double aspect = 1.0;
  double period = 2.0 * kPi;  // 0 = fully symmetric
  std::vector<P> pts;         // reference coordinates
  P centroid;
  double rms = 0.0;
  double reach = 0.0;         // farthest sample from the centroid
};

void segment(std::vector<P>& pts, P a, P b) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const int n = std::max(1, static_cast<int>(std::ceil(len / kSampleStep)));
  for (int k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / n;
    pts.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
  }
}

void arc(std::vector<P>& pts, double a0, double a1) {
  const int n = std::max(2, static_cast<int>(std::ceil((a1 - a0) / kSampleStep)));
  for (int k = 0; k <= n; ++k) {
    const double a = a0 + (a1 - a0) * k / n;
    pts.push_back({std::cos(a), std::sin(a)});
  }
}

P polar(double deg) { return {std::cos(deg * kDegree), std::sin(deg * kDegree)}; }

std::vector<P> outline_of(PrimitiveKind kind, double aspect, bool open_long_side) {
  std::vector<P> pts;
  const double h = 1.0 / aspect;
  switch (kind) {
    case PrimitiveKind::circle:
      arc(pts, 0.0, 2.0 * kPi);
      break;
    case PrimitiveKind::triangle:
      segment(pts, polar(-90), polar(30));
      segment(pts, polar(30), polar(150));
      segment(pts, polar(150), polar(-90));
      break;
    case PrimitiveKind::square:
      segment(pts, {-1, -h}, {1, -h});
      segment(pts, {1, -h}, {1, h});
      segment(pts, {1, h}, {-1, h});
      segment(pts, {-1, h}, {-1, -h});
      break;
    case PrimitiveKind::open_triangle:
      segment(pts, polar(30), polar(-90));
      segment(pts, polar(-90), polar(150));
      break;
    case PrimitiveKind::open_rectangle:
      if (open_long_side) {  // missing y = +h
        segment(pts, {1, h}, {1, -h});
        segment(pts, {1, -h}, {-1, -h});
        segment(pts, {-1, -h}, {-1, h});
      } else {  // missing x = +1
        segment(pts, {1, -h}, {-1, -h});
        segment(pts, {-1, -h}, {-1, h});
        segment(pts, {-1, h}, {1, h});
      }
      break;
    case PrimitiveKind::open_circle_1:
      arc(pts, -kPi / 4, kPi / 4);
      break;
    case PrimitiveKind::open_circle_2:
      arc(pts, -kPi / 2, kPi / 2);
      break;
    case PrimitiveKind::open_circle_3:
      arc(pts, -3 * kPi / 4, 3 * kPi / 4);
      break;
    case PrimitiveKind::straight_line:
      segment(pts, {-1, 0}, {1, 0});
      break;
    case PrimitiveKind::junction:
      segment(pts, {-1, 0}, {1, 0});
      segment(pts, {0, -1}, {0, 1});
      break;
  }
  return pts;
}

Shape make_shape(PrimitiveKind kind, double aspect, double period, bool open_long_side = false) {
  Shape s{kind, aspect, period, outline_of(kind, aspect, open_long_side), {}, 0.0, 0.0};
  for (const auto& p : s.pts) {
    s.centroid.x += p.x;
    s.centroid.y += p.y;
  }
  s.centroid.x /= static_cast<double>(s.pts.size());
  s.centroid.y /= static_cast<double>(s.pts.size());
  double ss = 0.0;
  for (const auto& p : s.pts) {
    const double d2 = (p.x - s.centroid.x) * (p.x - s.centroid.x) + (p.y - s.centroid.y) * (p.y - s.centroid.y);
    ss += d2;
    s.reach = std::max(s.reach, std::sqrt(d2));
  }
  s.rms = std::sqrt(ss / static_cast<double>(s.pts.size()));
  return s;
}

const std::vector<Shape>& shapes() {
  static const std::vector<Shape> all = [] {
    std::vector<Shape> v;
    v.push_back(make_shape(PrimitiveKind::triangle, 1.0, 2 * kPi / 3));
    v.push_back(make_shape(PrimitiveKind::circle, 1.0, 0.0));
    for (double a : kAspects) v.push_back(make_shape(PrimitiveKind::square, a, a == 1.0 ? kPi / 2 : kPi));
    v.push_back(make_shape(PrimitiveKind::open_triangle, 1.0, 2 * kPi));
    for (double a : kAspects) {
      v.push_back(make_shape(PrimitiveKind::open_rectangle, a, 2 * kPi, false));
      if (a != 1.0) v.push_back(make_shape(PrimitiveKind::open_rectangle, a, 2 * kPi, true));
    }
    v.push_back(make_shape(PrimitiveKind::open_circle_1, 1.0, 2 * kPi));
    v.push_back(make_shape(PrimitiveKind::open_circle_2, 1.0, 2 * kPi));
    v.push_back(make_shape(PrimitiveKind::open_circle_3, 1.0, 2 * kPi));
    v.push_back(make_shape(PrimitiveKind::straight_line, 1.0, kPi));
    v.push_back(make_shape(PrimitiveKind::junction, 1.0, kPi / 2));
    return v;
  }();
  return all;
}

struct Pose {
  std::size_t shape = 0;
  double theta = 0.0;
  double scale = 1.0;
  double ox = 0.0;
  double oy = 0.0;
  double score = -1.0;
};

// Agreement of a sample with a cell at distance d: full inside half a cell,
// Gaussian fall-off beyond.
double weight(double d2) {
  if (d2 <= 0.25) return 1.0;
  const double e = std::sqrt(d2) - 0.5;
  return std::exp(-2.0 * e * e);
}

constexpr int kReach = 2;  // cells searched around each sample

// Scores posed templates against one contour on a padded local grid.
class Scorer {
 public:
  Scorer(std::span<const Cell> contour, Cell anchor, int margin) : margin_(margin) {
    int w = 0, h = 0;
    for (auto c : contour) {
      w = std::max(w, c.x - anchor.x + 1);
      h = std::max(h, c.y - anchor.y + 1);
    }
    width_ = w + 2 * margin;
    height_ = h + 2 * margin;
    slot_.assign(static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_), -1);
    for (auto c : contour) {
      const int gx = c.x - anchor.x + margin, gy = c.y - anchor.y + margin;
      auto& slot = slot_[idx(gx, gy)];
      if (slot >= 0) continue;
      slot = static_cast<int>(cells_.size());
      cells_.push_back({gx, gy});
      cx_ += c.x - anchor.x;
      cy_ += c.y - anchor.y;
    }
    cx_ /= static_cast<double>(cells_.size());
    cy_ /= static_cast<double>(cells_.size());
    double ss = 0.0;
    for (auto c : cells_) {
      const double dx = c.x - margin - cx_, dy = c.y - margin - cy_;
      ss += dx * dx + dy * dy;
    }
    rms_ = std::sqrt(ss / static_cast<double>(cells_.size()));
    nearest_.assign(cells_.size(), 0.0);
    stamp_.assign(cells_.size(), 0);
    field_.assign(slot_.size(), 1e9);
    for (auto c : cells_)
      for (int dy = -kReach; dy <= kReach; ++dy)
        for (int dx = -kReach; dx <= kReach; ++dx) {
          const int qx = c.x + dx, qy = c.y + dy;
          if (qx < 0 || qy < 0 || qx >= width_ || qy >= height_) continue;
          auto& f = field_[idx(qx, qy)];
          f = std::min(f, static_cast<double>(dx * dx + dy * dy));
        }
    cover_.assign(slot_.size(), 0);
  }

  // Cheaper ranking pass: distances measured from the rounded sample cell,
  // recall counts contour cells within one cell of any sample.
  double coarse_score(const Shape& shape, double theta, double scale) {
    ++generation_;
    const double c = std::cos(theta), s = std::sin(theta);
    const std::size_t stride = std::max<std::size_t>(1, static_cast<std::size_t>(0.5 / (scale * kSampleStep)));
    double precision = 0.0;
    std::size_t samples = 0;
    for (std::size_t k = 0; k < shape.pts.size(); k += stride) {
      const double px = shape.pts[k].x - shape.centroid.x, py = shape.pts[k].y - shape.centroid.y;
      const int gx = static_cast<int>(std::floor(cx_ + scale * (c * px - s * py) + margin_ + 0.5));
      const int gy = static_cast<int>(std::floor(cy_ + scale * (s * px + c * py) + margin_ + 0.5));
      ++samples;
      if (gx < 1 || gy < 1 || gx >= width_ - 1 || gy >= height_ - 1) continue;
      precision += weight(field_[idx(gx, gy)]);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) cover_[idx(gx + dx, gy + dy)] = generation_;
    }
    std::size_t covered = 0;
    for (auto cell : cells_) covered += cover_[idx(cell.x, cell.y)] == generation_;
    precision /= static_cast<double>(std::max<std::size_t>(1, samples));
    const double recall = static_cast<double>(covered) / static_cast<double>(cells_.size());
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }

  double rms() const { return rms_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }

  // F1 of distance-weighted precision (template samples near the contour)
  // and recall (contour cells near the template).
  double score(const Shape& shape, double theta, double scale, double ox, double oy) {
    ++generation_;
    const double c = std::cos(theta), s = std::sin(theta);
    const std::size_t stride = std::max<std::size_t>(1, static_cast<std::size_t>(0.3 / (scale * kSampleStep)));
    double precision = 0.0;
    std::size_t samples = 0;
    for (std::size_t k = 0; k < shape.pts.size(); k += stride) {
      const double px = shape.pts[k].x - shape.centroid.x, py = shape.pts[k].y - shape.centroid.y;
      const double x = cx_ + ox + scale * (c * px - s * py) + margin_;
      const double y = cy_ + oy + scale * (s * px + c * py) + margin_;
      const int gx = static_cast<int>(std::floor(x + 0.5)), gy = static_cast<int>(std::floor(y + 0.5));
      ++samples;
      double best = 1e9;
      for (int dy = -kReach; dy <= kReach; ++dy)
        for (int dx = -kReach; dx <= kReach; ++dx) {
          const int qx = gx + dx, qy = gy + dy;
          if (qx < 0 || qy < 0 || qx >= width_ || qy >= height_) continue;
          const int slot = slot_[idx(qx, qy)];
          if (slot < 0) continue;
          const double d2 = (qx - x) * (qx - x) + (qy - y) * (qy - y);
          best = std::min(best, d2);
          auto& n = nearest_[static_cast<std::size_t>(slot)];
          if (stamp_[static_cast<std::size_t>(slot)] != generation_ || d2 < n) {
            stamp_[static_cast<std::size_t>(slot)] = generation_;
            n = d2;
          }
        }
      if (best < 1e9) precision += weight(best);
    }
    double recall = 0.0;
    for (std::size_t i = 0; i < cells_.size(); ++i)
      if (stamp_[i] == generation_) recall += weight(nearest_[i]);
    precision /= static_cast<double>(std::max<std::size_t>(1, samples));
    recall /= static_cast<double>(cells_.size());
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x); }

  int margin_;
  int width_ = 0;
  int height_ = 0;
  std::vector<int> slot_;  // grid cell -> contour index
  std::vector<Cell> cells_;
  std::vector<double> nearest_;
  std::vector<std::uint32_t> stamp_;
  std::vector<double> field_;  // squared distance from a cell centre to the contour
  std::vector<std::uint32_t> cover_;
  std::uint32_t generation_ = 0;
  double cx_ = 0.0, cy_ = 0.0, rms_ = 0.0;
};

}  // namespace

const char* to_string(PrimitiveKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

PrimitiveKind parse_primitive(const std::string& token) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (token == kKindNames[i]) return static_cast<PrimitiveKind>(i);
  throw PreconditionError("unknown primitive '" + token + "'");
}

Classification classify_primitive(std::span<const Cell> contour) {
  std::vector<Cell> cells(contour.begin(), contour.end());
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  if (cells.size() < 3) throw TooSmallError("a contour needs at least 3 cells, got " + std::to_string(cells.size()));

  Cell anchor{cells.front().x, cells.front().y};
  for (auto c : cells) {
    anchor.x = std::min(anchor.x, c.x);
    anchor.y = std::min(anchor.y, c.y);
  }
  // first pass sizes the margin from the contour's own spread
  double reach_ratio = 0.0;
  for (const auto& sh : shapes()) reach_ratio = std::max(reach_ratio, sh.reach / sh.rms);
  int margin = 4;
  {
    Scorer probe(cells, anchor, 1);
    margin = static_cast<int>(std::ceil(probe.rms() * kScaleFactors.back() * reach_ratio)) + 4;
  }
  Scorer scorer(cells, anchor, margin);
  if (scorer.rms() <= 0.0) throw TooSmallError("contour has no spatial extent");

  const auto& all = shapes();
  std::array<std::vector<Pose>, kPrimitiveCount> coarse;
  for (std::size_t si = 0; si < all.size(); ++si) {
    const auto& sh = all[si];
    const double s0 = scorer.rms() / sh.rms;
    const int turns = sh.period > 0.0 ? static_cast<int>(std::lround(sh.period / kRotationStep)) : 1;
    for (int r = 0; r < turns; ++r)
      for (double f : kScaleFactors) {
        Pose p{si, r * kRotationStep, s0 * f, 0.0, 0.0, 0.0};
        p.score = scorer.coarse_score(sh, p.theta, p.scale);
        coarse[static_cast<std::size_t>(sh.kind)].push_back(p);
      }
  }

  Classification out;
  Pose best;
  constexpr std::array<double, 5> kOffsets{-1.0, -0.5, 0.0, 0.5, 1.0};
  for (std::size_t k = 0; k < kPrimitiveCount; ++k) {
    auto& cand = coarse[k];
    const std::size_t keep = std::min<std::size_t>(3, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                      [](const Pose& a, const Pose& b) { return a.score > b.score; });
    Pose kind_best;
    for (std::size_t c = 0; c < keep; ++c) {
      Pose p = cand[c];
      p.score = scorer.score(all[p.shape], p.theta, p.scale, 0.0, 0.0);
      const bool turns = all[p.shape].period > 0.0;
      auto improve = [&](Pose q) {
        q.score = scorer.score(all[q.shape], q.theta, q.scale, q.ox, q.oy);
        if (q.score > p.score) p = q;
      };
      const Pose start = p;
      for (double oy : kOffsets)
        for (double ox : kOffsets) {
          Pose q = start;
          q.ox = ox;
          q.oy = oy;
          improve(q);
        }
      const Pose shifted = p;
      for (double ds : {0.95, 1.0, 1.05})
        for (double dt : {-0.5 * kRotationStep, 0.0, 0.5 * kRotationStep}) {
          if (!turns && dt != 0.0) continue;
          Pose q = shifted;
          q.scale *= ds;
          q.theta += dt;
          improve(q);
        }
      const Pose tuned = p;
      for (double oy : {-0.25, 0.0, 0.25})
        for (double ox : {-0.25, 0.0, 0.25}) {
          Pose q = tuned;
          q.ox += ox;
          q.oy += oy;
          improve(q);
        }
      if (p.score > kind_best.score) kind_best = p;
    }
    if (kind_best.theta < 0.0) kind_best.theta += all[kind_best.shape].period;
    out.kind_scores[k] = kind_best.score;
    if (kind_best.score > best.score) best = kind_best;
  }

  const auto& sh = all[best.shape];
  const double c = std::cos(best.theta), s = std::sin(best.theta);
  out.kind = sh.kind;
  out.orientation = best.theta;
  out.score = best.score;
  out.scale = best.scale;
  out.aspect = sh.aspect;
  out.cx = anchor.x + scorer.cx() + best.ox - best.scale * (c * sh.centroid.x - s * sh.centroid.y);
  out.cy = anchor.y + scorer.cy() + best.oy - best.scale * (s * sh.centroid.x + c * sh.centroid.y);
  return out;
}

std::vector<Cell> render_primitive(PrimitiveKind kind, double cx, double cy, double scale, double orientation,
                                   double aspect) {
  if (!(scale > 0.0)) throw PreconditionError("primitive scale must be > 0");
  const auto pts = outline_of(kind, aspect, false);
  const double c = std::cos(orientation), s = std::sin(orientation);
  const std::size_t stride = std::max<std::size_t>(1, static_cast<std::size_t>(0.25 / (scale * kSampleStep)));
  std::vector<Cell> out;
  for (std::size_t k = 0; k < pts.size(); k += stride) {
    const double x = cx + scale * (c * pts[k].x - s * pts[k].y);
    const double y = cy + scale * (s * pts[k].x + c * pts[k].y);
    out.push_back({static_cast<int>(std::floor(x + 0.5)), static_cast<int>(std::floor(y + 0.5))});
  }
  const double x = cx + scale * (c * pts.back().x - s * pts.back().y);
  const double y = cy + scale * (s * pts.back().x + c * pts.back().y);
  out.push_back({static_cast<int>(std::floor(x + 0.5)), static_cast<int>(std::floor(y + 0.5))});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace ajo
