#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include "ajo/errors.hpp"
#include "ajo/fractal_decomposition.hpp"

namespace ajo {

namespace {

struct LineFit {
  double mx = 0.0, my = 0.0;  // mean
  double ux = 1.0, uy = 0.0;  // principal direction, angle in [0, pi)
  double deviation = 0.0;     // max perpendicular distance
  double lo = 0.0, hi = 0.0;  // projection extent along u
};

LineFit fit_line(std::span<const Cell> cells, Cell origin = {0, 0}) {
  LineFit f;
  const double n = static_cast<double>(cells.size());
  for (auto c : cells) {
    f.mx += c.x - origin.x;
    f.my += c.y - origin.y;
  }
  f.mx /= n;
  f.my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (auto c : cells) {
    const double dx = c.x - origin.x - f.mx, dy = c.y - origin.y - f.my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  f.ux = std::cos(theta);
  f.uy = std::sin(theta);
  if (f.uy < 0.0 || (f.uy == 0.0 && f.ux < 0.0)) {
    f.ux = -f.ux;
    f.uy = -f.uy;
  }
  f.lo = 1e300;
  f.hi = -1e300;
  for (auto c : cells) {
    const double dx = c.x - origin.x - f.mx, dy = c.y - origin.y - f.my;
    f.deviation = std::max(f.deviation, std::abs(-f.uy * dx + f.ux * dy));
    const double t = f.ux * dx + f.uy * dy;
    f.lo = std::min(f.lo, t);
    f.hi = std::max(f.hi, t);
  }
  return f;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[static_cast<std::size_t>(a)] != a) a = parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

Cell foreground_origin(const Bitmap& b) {
  Cell o{b.width, b.height};
  for (int y = 0; y < b.height; ++y)
    for (int x = 0; x < b.width; ++x)
      if (b.get(x, y)) {
        o.x = std::min(o.x, x);
        o.y = std::min(o.y, y);
      }
  return o;
}

// Geodesic distance inside the foreground, capped at limit.
bool reachable_within(const Bitmap& b, Cell from, Cell to, int limit) {
  std::map<Cell, int> dist{{from, 0}};
  std::deque<Cell> queue{from};
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    const int d = dist[c];
    if (c == to) return true;
    if (d >= limit) continue;
    for (auto n : neighbours(c, Connectivity::eight))
      if (b.get(n) && !dist.contains(n)) {
        dist[n] = d + 1;
        queue.push_back(n);
      }
  }
  return false;
}

std::vector<std::vector<Cell>> junction_clusters(const Bitmap& skeleton, Bitmap& mask) {
  mask = Bitmap(skeleton.width, skeleton.height);
  for (int y = 0; y < skeleton.height; ++y)
    for (int x = 0; x < skeleton.width; ++x)
      if (is_junction(skeleton, x, y)) mask.set(x, y);
  // Absorb branching cells next to a junction; a thinned crossing can leave a
  // small cycle whose corners would otherwise merge two branches.
  for (bool grew = true; grew;) {
    grew = false;
    for (auto c : skeleton.cells()) {
      if (mask.get(c) || neighbour_count(skeleton, c.x, c.y) < 3) continue;
      const auto ns = neighbours(c, Connectivity::eight);
      if (std::any_of(ns.begin(), ns.end(), [&](Cell n) { return mask.get(n); })) {
        mask.set(c);
        grew = true;
      }
    }
  }
  return components(mask, Connectivity::eight);
}

}  // namespace

SplitResult split_groups(const Bitmap& bitmap) {
  SplitResult out;
  out.original = bitmap;
  const Bitmap skeleton = skeletonize(bitmap);
  Bitmap mask;
  const auto clusters = junction_clusters(skeleton, mask);
  for (auto& comp : components(bitmap, Connectivity::eight)) {
    Group g{std::move(comp), 0};
    const Bitmap own = from_cells(bitmap.width, bitmap.height, g.cells);
    for (const auto& cl : clusters) g.junctions += own.get(cl.front());
    (g.junctions > 0 ? out.cg : out.ncg).push_back(std::move(g));
  }
  return out;
}

SplitResult split_groups(const GridImage& image) { return split_groups(binarize(image)); }

Bitmap connect_gaps(const Bitmap& bitmap, int gap) {
  std::vector<Cell> ends;
  for (int y = 0; y < bitmap.height; ++y)
    for (int x = 0; x < bitmap.width; ++x)
      if (is_endpoint(bitmap, x, y)) ends.push_back({x, y});
  struct Candidate {
    int d2;
    std::size_t a, b;
  };
  std::vector<Candidate> cands;
  for (std::size_t a = 0; a < ends.size(); ++a)
    for (std::size_t b = a + 1; b < ends.size(); ++b) {
      const int cd = chebyshev(ends[a], ends[b]);
      if (cd < 2 || cd > gap + 1) continue;
      const auto line = line_cells(ends[a], ends[b]);
      if (std::all_of(line.begin(), line.end(), [&](Cell c) { return bitmap.get(c); })) continue;
      if (reachable_within(bitmap, ends[a], ends[b], 2 * cd + 2)) continue;
      const int dx = ends[a].x - ends[b].x, dy = ends[a].y - ends[b].y;
      cands.push_back({dx * dx + dy * dy, a, b});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& p, const Candidate& q) { return p.d2 < q.d2; });
  Bitmap out = bitmap;
  std::vector<bool> used(ends.size(), false);
  for (const auto& c : cands) {
    if (used[c.a] || used[c.b]) continue;
    used[c.a] = used[c.b] = true;
    draw_line(out, ends[c.a], ends[c.b]);
  }
  return out;
}

CsbslResult csbsl_pipeline(const GridImage& image, int loops, const CsbslParams& params) {
  if (loops < 1) throw PreconditionError("csbsl needs at least one loop");
  if (params.blur_levels < 1) throw PreconditionError("csbsl needs at least one blur level");
  CsbslResult result;
  Bitmap current = binarize(image);
  for (int loop = 0; loop < loops; ++loop) {
    std::vector<GridImage> row;
    const Bitmap connected = connect_gaps(current, params.gap);
    row.push_back(to_image(connected, image.channel()));
    const GridImage smoothed = box_blur(row.back(), 1);
    row.push_back(smoothed);
    std::vector<int> counts;
    Bitmap contour;
    for (int b = 1; b <= params.blur_levels; ++b) {
      const GridImage blurred = box_blur(smoothed, b);
      const Bitmap band = binarize(blurred, 0.5 / (2 * b + 1) - 1e-12);
      counts.push_back(static_cast<int>(components(band, Connectivity::eight).size()));
      row.push_back(to_image(band, image.channel()));
      if (b == 1) contour = band;
    }
    // mode of the per-level group counts, earliest level on ties
    int best = counts.front(), best_n = 0;
    for (int c : counts) {
      const int n = static_cast<int>(std::count(counts.begin(), counts.end(), c));
      if (n > best_n) {
        best = c;
        best_n = n;
      }
    }
    // The blur band only replaces the geometry when it changes the grouping;
    // otherwise its skeleton would drift by a cell on every pass.
    const bool agrees = static_cast<int>(components(connected, Connectivity::eight).size()) == best;
    current = skeletonize(agrees ? connected : contour, params.spur_length);
    row.push_back(to_image(current, image.channel()));
    result.stages.push_back(std::move(row));
    result.group_counts.push_back(std::move(counts));
    result.most_probable_groups.push_back(best);
  }
  result.skeleton = current;
  return result;
}

std::vector<Stroke> trace_strokes(const Bitmap& skeleton, const JidtParams& params) {
  Bitmap jmask;
  const auto clusters = junction_clusters(skeleton, jmask);
  std::map<Cell, int> cluster_of;
  for (std::size_t k = 0; k < clusters.size(); ++k)
    for (auto c : clusters[k]) cluster_of[c] = static_cast<int>(k);

  Bitmap rest = skeleton;
  for (auto c : jmask.cells()) rest.set(c, false);
  const auto branches = components(rest, Connectivity::eight);

  struct Attachment {
    int branch;
    int cluster;
    double dx, dy;  // outgoing direction
  };
  std::vector<Attachment> att;
  std::vector<std::vector<int>> branch_clusters(branches.size());
  constexpr int kDirectionReach = 5;
  for (std::size_t bi = 0; bi < branches.size(); ++bi) {
    const auto& br = branches[bi];
    const Bitmap own = from_cells(skeleton.width, skeleton.height, br);
    std::map<int, std::vector<Cell>> touching;  // cluster -> branch cells next to it
    for (auto c : br)
      for (auto n : neighbours(c, Connectivity::eight))
        if (auto it = cluster_of.find(n); it != cluster_of.end()) {
          auto& v = touching[it->second];
          if (std::find(v.begin(), v.end(), c) == v.end()) v.push_back(c);
        }
    for (auto& [cl, cells] : touching) {
      branch_clusters[bi].push_back(cl);
      // one attachment per separate contact (a loop may touch a cluster twice)
      std::vector<std::vector<Cell>> contacts;
      for (auto c : cells) {
        bool placed = false;
        for (auto& grp : contacts)
          if (std::any_of(grp.begin(), grp.end(), [&](Cell g) { return chebyshev(g, c) <= 1; })) {
            grp.push_back(c);
            placed = true;
            break;
          }
        if (!placed) contacts.push_back({c});
      }
      for (const auto& contact : contacts) {
        const Cell start = contact.front();
        std::map<Cell, int> dist{{start, 0}};
        std::deque<Cell> queue{start};
        Cell far = start;
        int far_d = 0;
        while (!queue.empty()) {
          const Cell c = queue.front();
          queue.pop_front();
          const int d = dist[c];
          if (d > far_d || (d == far_d && c < far)) {
            far = c;
            far_d = d;
          }
          if (d >= kDirectionReach) continue;
          for (auto n : neighbours(c, Connectivity::eight))
            if (own.get(n) && !dist.contains(n)) {
              dist[n] = d + 1;
              queue.push_back(n);
            }
        }
        att.push_back({static_cast<int>(bi), cl, static_cast<double>(far.x - start.x), static_cast<double>(far.y - start.y)});
      }
    }
  }

  UnionFind uf(branches.size());
  std::vector<std::vector<std::size_t>> at_cluster(clusters.size());
  for (std::size_t i = 0; i < att.size(); ++i) at_cluster[static_cast<std::size_t>(att[i].cluster)].push_back(i);
  const double opposite = -std::cos(45.0 * std::numbers::pi / 180.0);
  for (const auto& list : at_cluster) {
    struct Pair {
      double cosine;
      std::size_t a, b;
    };
    std::vector<Pair> pairs;
    for (std::size_t x = 0; x < list.size(); ++x)
      for (std::size_t y = x + 1; y < list.size(); ++y) {
        const auto& p = att[list[x]];
        const auto& q = att[list[y]];
        const double np = std::hypot(p.dx, p.dy), nq = std::hypot(q.dx, q.dy);
        if (np == 0.0 || nq == 0.0) continue;
        const double cosine = (p.dx * q.dx + p.dy * q.dy) / (np * nq);
        if (cosine <= opposite) pairs.push_back({cosine, list[x], list[y]});
      }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& p, const Pair& q) { return p.cosine < q.cosine; });
    std::vector<bool> used(att.size(), false);
    for (const auto& p : pairs) {
      if (used[p.a] || used[p.b]) continue;
      used[p.a] = used[p.b] = true;
      uf.unite(att[p.a].branch, att[p.b].branch);
    }
  }

  std::map<int, std::size_t> stroke_of_root;
  std::vector<Stroke> strokes;
  for (std::size_t bi = 0; bi < branches.size(); ++bi) {
    const int root = uf.find(static_cast<int>(bi));
    auto [it, fresh] = stroke_of_root.try_emplace(root, strokes.size());
    if (fresh) strokes.emplace_back();
    auto& s = strokes[it->second];
    s.cells.insert(s.cells.end(), branches[bi].begin(), branches[bi].end());
    for (int cl : branch_clusters[bi])
      if (std::find(s.junctions.begin(), s.junctions.end(), cl) == s.junctions.end()) s.junctions.push_back(cl);
  }
  // bare junction blobs with no branches
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const bool attached = std::any_of(strokes.begin(), strokes.end(), [&](const Stroke& s) {
      return std::find(s.junctions.begin(), s.junctions.end(), static_cast<int>(k)) != s.junctions.end();
    });
    if (!attached) strokes.push_back({{}, {static_cast<int>(k)}, false, 0.0, false});
  }

  std::vector<int> cluster_users(clusters.size(), 0);
  for (const auto& s : strokes)
    for (int cl : s.junctions) ++cluster_users[static_cast<std::size_t>(cl)];
  for (auto& s : strokes) {
    for (int cl : s.junctions) s.cells.insert(s.cells.end(), clusters[static_cast<std::size_t>(cl)].begin(), clusters[static_cast<std::size_t>(cl)].end());
    std::sort(s.cells.begin(), s.cells.end(), [](Cell a, Cell b) { return a.y < b.y || (a.y == b.y && a.x < b.x); });
    s.cells.erase(std::unique(s.cells.begin(), s.cells.end()), s.cells.end());
    std::sort(s.junctions.begin(), s.junctions.end());
    s.crosses_other = std::any_of(s.junctions.begin(), s.junctions.end(), [&](int cl) { return cluster_users[static_cast<std::size_t>(cl)] > 1; });
    if (s.cells.size() >= 2) {
      const auto f = fit_line(s.cells);
      s.straight = f.deviation <= params.straight_tolerance;
      const double chord = std::min(std::abs(f.ux) > 1e-12 ? skeleton.width / std::abs(f.ux) : 1e300,
                                    std::abs(f.uy) > 1e-12 ? skeleton.height / std::abs(f.uy) : 1e300);
      s.span = (f.hi - f.lo + 1.0) / chord;
    }
  }
  return strokes;
}

JidtResult jidt_denoise(const Bitmap& bitmap, const JidtParams& params) {
  JidtResult out;
  const Bitmap skeleton = thin(bitmap);
  out.strokes = trace_strokes(skeleton, params);
  Bitmap keep(skeleton.width, skeleton.height);
  std::vector<const Stroke*> noisy;
  for (const auto& s : out.strokes) {
    if (s.straight && s.span >= params.span_fraction && s.crosses_other)
      noisy.push_back(&s);
    else
      for (auto c : s.cells) keep.set(c);
  }
  for (const auto* s : noisy) out.noise.push_back({s->cells, static_cast<int>(s->junctions.size())});
  out.signal_image = keep;
  for (auto& comp : components(keep, Connectivity::eight)) out.signal.push_back({std::move(comp), 0});
  return out;
}

CircleFit fit_circle(std::span<const Cell> cells) {
  CircleFit f;
  if (cells.size() < 3) throw TooSmallError("circle fit needs at least 3 cells");
  double mx = 0.0, my = 0.0;
  for (auto c : cells) {
    mx += c.x;
    my += c.y;
  }
  const double n = static_cast<double>(cells.size());
  mx /= n;
  my /= n;
  // minimise sum (u^2 + v^2 + D u + E v + F)^2 in centred coordinates
  double suu = 0, svv = 0, suv = 0, su = 0, sv = 0, suz = 0, svz = 0, sz = 0;
  for (auto c : cells) {
    const double u = c.x - mx, v = c.y - my, z = u * u + v * v;
    suu += u * u;
    svv += v * v;
    suv += u * v;
    su += u;
    sv += v;
    suz += u * z;
    svz += v * z;
    sz += z;
  }
  const double a[3][3] = {{suu, suv, su}, {suv, svv, sv}, {su, sv, n}};
  const double rhs[3] = {-suz, -svz, -sz};
  auto det3 = [](const double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const double det = det3(a);
  if (std::abs(det) < 1e-9 * (suu * svv * n + 1.0)) {
    f.rms = std::numeric_limits<double>::infinity();
    f.radius = std::numeric_limits<double>::infinity();
    return f;
  }
  double sol[3];
  for (int k = 0; k < 3; ++k) {
    double m[3][3];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m[r][c] = c == k ? rhs[r] : a[r][c];
    sol[k] = det3(m) / det;
  }
  f.cx = mx - sol[0] / 2.0;
  f.cy = my - sol[1] / 2.0;
  f.radius = std::sqrt(std::max(0.0, sol[0] * sol[0] / 4.0 + sol[1] * sol[1] / 4.0 - sol[2]));
  double ss = 0.0;
  for (auto c : cells) {
    const double e = std::hypot(c.x - f.cx, c.y - f.cy) - f.radius;
    ss += e * e;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

GcslccResult gcslcc_extrapolate(const Bitmap& bitmap, const GcslccParams& params) {
  GcslccResult out;
  out.image = bitmap;
  const auto comps = components(bitmap, Connectivity::eight);
  if (comps.empty()) return out;
  const Cell origin = foreground_origin(bitmap);

  enum class Form { line, arc, other };
  struct Info {
    Form form = Form::other;
    LineFit line;
    CircleFit circle;
  };
  std::vector<Info> info(comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto& cells = comps[i];
    if (cells.size() < 2) continue;
    const Bitmap own = from_cells(bitmap.width, bitmap.height, cells);
    int endpoints = 0, junctions = 0;
    for (auto c : cells) {
      endpoints += is_endpoint(own, c.x, c.y);
      junctions += is_junction(own, c.x, c.y);
    }
    if (junctions > 0) continue;
    info[i].line = fit_line(cells, origin);
    if (info[i].line.deviation <= params.straight_tolerance) {
      info[i].form = Form::line;
    } else if (endpoints == 2 && cells.size() >= 5) {
      std::vector<Cell> local;
      for (auto c : cells) local.push_back({c.x - origin.x, c.y - origin.y});
      info[i].circle = fit_circle(local);
      if (info[i].circle.rms <= params.arc_residual) info[i].form = Form::arc;
    }
  }

  UnionFind uf(comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i)
    for (std::size_t j = i + 1; j < comps.size(); ++j) {
      const auto& a = info[i];
      const auto& b = info[j];
      if (a.form != b.form) continue;
      if (a.form == Form::line) {
        const double ta = std::atan2(a.line.uy, a.line.ux), tb = std::atan2(b.line.uy, b.line.ux);
        double d = std::abs(ta - tb);
        if (d > std::numbers::pi / 2) d = std::numbers::pi - d;
        if (d > params.slope_tolerance) continue;
        // offset of b's mean from a's line
        const double off = std::abs(-a.line.uy * (b.line.mx - a.line.mx) + a.line.ux * (b.line.my - a.line.my));
        const double off2 = std::abs(-b.line.uy * (a.line.mx - b.line.mx) + b.line.ux * (a.line.my - b.line.my));
        if (std::max(off, off2) <= params.offset_tolerance) uf.unite(static_cast<int>(i), static_cast<int>(j));
      } else if (a.form == Form::arc) {
        const double dc = std::hypot(a.circle.cx - b.circle.cx, a.circle.cy - b.circle.cy);
        const double dr = std::abs(a.circle.radius - b.circle.radius);
        bool same = dc <= params.center_tolerance && dr <= params.radius_tolerance * std::max(a.circle.radius, b.circle.radius);
        if (!same) {
          // short arcs fit loosely on their own; accept if one circle explains both
          std::vector<Cell> local;
          for (const auto* cells : {&comps[i], &comps[j]})
            for (auto c : *cells) local.push_back({c.x - origin.x, c.y - origin.y});
          same = fit_circle(local).rms <= params.arc_residual * 0.5;
        }
        if (same) uf.unite(static_cast<int>(i), static_cast<int>(j));
      }
    }

  std::map<int, std::size_t> group_of_root;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const int root = uf.find(static_cast<int>(i));
    auto [it, fresh] = group_of_root.try_emplace(root, out.groups.size());
    if (fresh) out.groups.emplace_back();
    auto& g = out.groups[it->second];
    g.sources.push_back(static_cast<int>(i));
    g.cells.insert(g.cells.end(), comps[i].begin(), comps[i].end());
    g.kind = info[i].form == Form::line ? GlobalKind::line : GlobalKind::other;
  }

  for (auto& g : out.groups) {
    if (g.sources.size() < 2) continue;
    const auto form = info[static_cast<std::size_t>(g.sources.front())].form;
    Bitmap drawn(bitmap.width, bitmap.height);
    if (form == Form::line) {
      // bridge consecutive segments along the shared direction
      const auto& ref = info[static_cast<std::size_t>(g.sources.front())].line;
      auto proj = [&](Cell c) { return ref.ux * (c.x - origin.x) + ref.uy * (c.y - origin.y); };
      std::vector<std::pair<Cell, Cell>> spans;  // (low end, high end) per segment
      for (int s : g.sources) {
        const auto& cells = comps[static_cast<std::size_t>(s)];
        Cell lo = cells.front(), hi = cells.front();
        for (auto c : cells) {
          if (proj(c) < proj(lo)) lo = c;
          if (proj(c) > proj(hi)) hi = c;
        }
        spans.emplace_back(lo, hi);
      }
      std::sort(spans.begin(), spans.end(), [&](const auto& p, const auto& q) { return proj(p.first) < proj(q.first); });
      for (std::size_t k = 0; k + 1 < spans.size(); ++k) draw_line(drawn, spans[k].second, spans[k + 1].first);
      g.kind = GlobalKind::line;
    } else {
      std::vector<Cell> local;
      for (auto c : g.cells) local.push_back({c.x - origin.x, c.y - origin.y});
      const auto fit = fit_circle(local);
      const int n = std::max(16, static_cast<int>(std::ceil(2.0 * std::numbers::pi * fit.radius * 4.0)));
      for (int k = 0; k < n; ++k) {
        const double a = 2.0 * std::numbers::pi * k / n;
        drawn.set(static_cast<int>(std::lround(fit.cx + fit.radius * std::cos(a))) + origin.x,
                  static_cast<int>(std::lround(fit.cy + fit.radius * std::sin(a))) + origin.y);
      }
      g.kind = GlobalKind::circle;
      g.circle = fit;
      g.circle.cx += origin.x;
      g.circle.cy += origin.y;
    }
    for (auto c : drawn.cells()) {
      if (!out.image.get(c)) g.cells.push_back(c);
      out.image.set(c);
    }
    std::sort(g.cells.begin(), g.cells.end(), [](Cell a, Cell b) { return a.y < b.y || (a.y == b.y && a.x < b.x); });
  }
  return out;
}

}  // namespace ajo
