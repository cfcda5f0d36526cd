#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ajo/errors.hpp"
#include "ajo/fractal_decomposition.hpp"
#include "doctest.h"
#include "raster_fixtures.hpp"

using namespace ajo;
using testfx::CellSet;

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t overlap(const Bitmap& b, const CellSet& s) {
  std::size_t n = 0;
  for (auto c : s) n += b.get(c);
  return n;
}

// Letter "A" crossed by a straight line running edge to edge.
struct CrossedGlyph {
  CellSet glyph;
  CellSet line;
  Bitmap image;
};

CrossedGlyph crossed_glyph(bool diagonal) {
  CrossedGlyph f;
  testfx::bresenham(f.glyph, 20, 6, 10, 34);
  testfx::bresenham(f.glyph, 20, 6, 30, 34);
  testfx::bresenham(f.glyph, 14, 23, 26, 23);
  if (diagonal)
    testfx::bresenham(f.line, 3, 39, 36, 0);
  else
    testfx::bresenham(f.line, 0, 15, 39, 15);
  CellSet all = f.glyph;
  all.insert(f.line.begin(), f.line.end());
  f.image = binarize(testfx::raster_image(40, 40, all));
  return f;
}

}  // namespace

TEST_CASE("image construction and io") {
  CHECK_THROWS_AS(GridImage(0, 3), EmptyImageError);
  CHECK_THROWS_AS(GridImage(2, 2, 1.5), RangeError);
  CHECK_THROWS_AS(GridImage(2, 2, std::vector<double>(3, 0.0)), PreconditionError);

  GridImage img(3, 2, 0.0, Channel::touch);
  img.set(1, 0, 1.0);
  img.set(2, 1, 5.0 / 9.0);
  std::stringstream pgm;
  write_pgm(pgm, img);
  const auto back = read_pgm(pgm);
  CHECK(back.width() == 3);
  CHECK(back.at(1, 0) == doctest::Approx(1.0));
  CHECK(back.at(2, 1) == doctest::Approx(5.0 / 9.0).epsilon(0.01));

  std::stringstream txt;
  write_text_grid(txt, img);
  CHECK(txt.str() == "090\n005\n");
  std::stringstream dotted("..9\n.9.\n");
  const auto g = read_text_grid(dotted);
  CHECK(g.at(2, 0) == 1.0);
  CHECK(g.at(0, 0) == 0.0);

  std::stringstream bad("P2\n2 2\n255\n0 0 0 x\n");
  try {
    read_pgm(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
}

TEST_CASE("cube fusion counts") {
  const GridImage flat(8, 8, 0.4);
  CHECK(build_cube(flat, Geometry::rectangular).region_count == 1);

  GridImage halves(8, 8, 0.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 4; x < 8; ++x) halves.set(x, y, 1.0);
  CHECK(build_cube(halves, Geometry::rectangular).region_count == 2);
  CHECK(build_cube(halves, Geometry::hexagonal).region_count == 2);

  GridImage checker(8, 8, 0.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) checker.set(x, y, (x + y) % 2 ? 1.0 : 0.0);
  CHECK(build_cube(checker, Geometry::rectangular).region_count == 64);
  // hex rows share a diagonal neighbour, which joins equal cells of alternate rows
  CHECK(build_cube(checker, Geometry::hexagonal).region_count < 64);

  // values within the fusion tolerance fuse
  GridImage near(8, 8, 0.5);
  near.set(3, 3, 0.5 + 0.5 / 256.0);
  CHECK(build_cube(near, Geometry::rectangular).region_count == 1);
  near.set(3, 3, 0.5 + 2.0 / 256.0);
  CHECK(build_cube(near, Geometry::rectangular).region_count == 2);
}

TEST_CASE("cube pyramid holds block means") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GridImage img(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img.set(x, y, u(rng));
  const auto cube = build_cube(img, Geometry::rectangular);
  double total = 0.0;
  for (double v : img.values()) total += v;
  CHECK(cube.layers[3].at(0, 0) == doctest::Approx(total / 64.0).epsilon(1e-12));
  const double q = (img.at(4, 0) + img.at(5, 0) + img.at(4, 1) + img.at(5, 1)) / 4.0;
  CHECK(cube.layers[1].at(2, 0) == doctest::Approx(q).epsilon(1e-12));

  // non-8x8 inputs are resampled; a 16x16 constant stays constant
  const auto big = build_cube(GridImage(16, 16, 0.25), Geometry::rectangular);
  CHECK(big.layers[0].width() == 8);
  CHECK(big.layers[0].at(5, 5) == doctest::Approx(0.25));
}

TEST_CASE("cube grid tiles larger images") {
  const auto grid = build_cube_grid(GridImage(20, 9, 0.0), Geometry::rectangular);
  CHECK(grid.columns == 3);
  CHECK(grid.rows == 2);
  CHECK(grid.cubes.size() == 6);
  CHECK(grid.adjacent.size() == 7);
}

TEST_CASE("neighbourhood counts under the three geometries") {
  Bitmap b(5, 5);
  for (int y = 1; y <= 3; ++y)
    for (int x = 1; x <= 3; ++x) b.set(x, y);
  const auto n = neighbourhood_counts(b, {2, 2});
  CHECK(n.von_neumann == 4);
  CHECK(n.moore == 8);
  CHECK(n.hex6 == 6);
}

TEST_CASE("split_groups separates touching curves") {
  CellSet s;
  testfx::midpoint_arc(s, 10, 10, 6, 0, 360);
  testfx::bresenham(s, 24, 2, 38, 16);
  testfx::bresenham(s, 24, 16, 38, 2);
  const auto r = split_groups(testfx::raster_image(40, 20, s));
  REQUIRE(r.ncg.size() == 1);
  REQUIRE(r.cg.size() == 1);
  CHECK(r.ncg[0].cells.front().x < 20);
  CHECK(r.cg[0].cells.front().x > 20);
  CHECK(r.cg[0].junctions >= 1);
}

TEST_CASE("connect_gaps bridges short breaks only") {
  Bitmap b(30, 5);
  for (int x = 0; x < 10; ++x) b.set(x, 2);
  for (int x = 12; x < 20; ++x) b.set(x, 2);  // gap of 2
  for (int x = 27; x < 30; ++x) b.set(x, 2);  // gap of 7
  const auto c = connect_gaps(b, 3);
  CHECK(c.get(10, 2));
  CHECK(c.get(11, 2));
  CHECK_FALSE(c.get(23, 2));
  CHECK(components(c, Connectivity::eight).size() == 2);
}

TEST_CASE("csbsl closes a broken circle and is idempotent") {
  CellSet s;
  testfx::midpoint_arc(s, 15, 15, 9, 10, 350);  // 20 degree gap
  const auto img = testfx::raster_image(32, 32, s);
  const auto r = csbsl_pipeline(img, 2);
  REQUIRE(r.stages.size() == 2);
  CHECK(r.stages[0].size() == static_cast<std::size_t>(CsbslResult::fixed_stages + 3));
  CHECK(r.most_probable_groups[0] == 1);
  CHECK(components(r.skeleton, Connectivity::eight).size() == 1);
  // every skeleton cell stays near the circle
  for (auto c : r.skeleton.cells()) CHECK(std::abs(std::hypot(c.x - 15.0, c.y - 15.0) - 9.0) <= 1.5);

  // one more loop on a converged skeleton changes nothing
  const auto once = csbsl_pipeline(to_image(r.skeleton), 1).skeleton;
  const auto twice = csbsl_pipeline(to_image(once), 1).skeleton;
  CHECK(once == twice);
}

TEST_CASE("classify_primitive recognises all ten primitives") {
  for (int sc : {8, 11, 14})
    for (int k = 0; k < kPrimitiveCount; ++k) {
      const auto kind = static_cast<PrimitiveKind>(k);
      const auto cells = testfx::primitive_raster(kind, 30, sc);
      const auto c = classify_primitive(cells);
      CAPTURE(sc);
      CAPTURE(to_string(kind));
      CHECK(c.kind == kind);
      for (int j = 0; j < kPrimitiveCount; ++j)
        if (j != k) CHECK(c.kind_scores[static_cast<std::size_t>(j)] < c.score);
    }
}

TEST_CASE("classify_primitive pose") {
  const auto circle = classify_primitive(testfx::primitive_raster(PrimitiveKind::circle, 30, 10));
  CHECK(circle.cx == doctest::Approx(30.0).epsilon(0.02));
  CHECK(circle.scale == doctest::Approx(10.0).epsilon(0.05));
  CHECK(circle.orientation == 0.0);

  // square rotated by 45 degrees
  CellSet s;
  const int c = 30, r = 10;
  testfx::bresenham(s, c, c - r, c + r, c);
  testfx::bresenham(s, c + r, c, c, c + r);
  testfx::bresenham(s, c, c + r, c - r, c);
  testfx::bresenham(s, c - r, c, c, c - r);
  const auto diamond = classify_primitive(std::vector<Cell>(s.begin(), s.end()));
  CHECK(diamond.kind == PrimitiveKind::square);
  CHECK(diamond.score >= 0.9);
  CHECK(std::abs(diamond.orientation - kPi / 4) <= 0.1);

  // a "u" is an arc family member, not a closed shape
  CellSet u;
  testfx::midpoint_arc(u, 30, 30, 9, 0, 180);
  testfx::bresenham(u, 21, 30, 21, 24);
  testfx::bresenham(u, 39, 30, 39, 24);
  const auto cu = classify_primitive(std::vector<Cell>(u.begin(), u.end()));
  CHECK((cu.kind == PrimitiveKind::open_circle_2 || cu.kind == PrimitiveKind::open_circle_3 ||
         cu.kind == PrimitiveKind::open_rectangle));
  CHECK_FALSE(is_closed(cu.kind));

  CHECK_THROWS_AS(classify_primitive(std::vector<Cell>{{0, 0}, {1, 0}}), TooSmallError);
}

TEST_CASE("render_primitive round-trips through the classifier") {
  for (int k = 0; k < kPrimitiveCount; ++k) {
    const auto kind = static_cast<PrimitiveKind>(k);
    const auto cells = render_primitive(kind, 25.0, 25.0, 9.0, 0.0);
    CAPTURE(to_string(kind));
    CHECK(classify_primitive(cells).kind == kind);
  }
  CHECK(parse_primitive("open-circle-3") == PrimitiveKind::open_circle_3);
  CHECK_THROWS_AS(parse_primitive("hexagon"), PreconditionError);
}

TEST_CASE("jidt separates a crossing line from a glyph") {
  for (bool diagonal : {false, true}) {
    CAPTURE(diagonal);
    const auto f = crossed_glyph(diagonal);
    const auto r = jidt_denoise(f.image);
    REQUIRE(r.noise.size() == 1);
    const Bitmap noise = from_cells(40, 40, r.noise[0].cells);
    // noise is the line, up to the one-cell wobble of the thinned crossings
    const Bitmap line_zone = dilate(from_cells(40, 40, std::vector<Cell>(f.line.begin(), f.line.end())), 1);
    for (auto c : noise.cells()) CHECK(line_zone.get(c));
    CHECK(noise.count() >= f.line.size() * 8 / 10);
    CHECK(overlap(r.signal_image, f.line) <= 10);
    CHECK(overlap(r.signal_image, f.glyph) >= f.glyph.size() * 8 / 10);
  }
}

TEST_CASE("jidt leaves junction-free images alone") {
  CellSet s;
  testfx::midpoint_arc(s, 12, 12, 8, 0, 360);
  testfx::bresenham(s, 0, 30, 39, 30);
  const Bitmap b = binarize(testfx::raster_image(40, 35, s));
  const auto r = jidt_denoise(b);
  CHECK(r.noise.empty());
  CHECK(r.signal_image == thin(b));
}

TEST_CASE("jidt on two full-span crossing lines") {
  CellSet s;
  testfx::bresenham(s, 0, 20, 39, 20);
  testfx::bresenham(s, 20, 0, 20, 39);
  const auto b = binarize(testfx::raster_image(40, 40, s));
  const auto r = jidt_denoise(b);
  CHECK(r.noise.size() == 2);
  CHECK(classify_primitive(b.cells()).kind == PrimitiveKind::junction);
}

TEST_CASE("fit_circle recovers a circle") {
  CellSet s;
  testfx::midpoint_arc(s, 40, 30, 15, 0, 360);
  const auto f = fit_circle(std::vector<Cell>(s.begin(), s.end()));
  CHECK(f.cx == doctest::Approx(40.0).epsilon(0.01));
  CHECK(f.cy == doctest::Approx(30.0).epsilon(0.01));
  CHECK(f.radius == doctest::Approx(15.0).epsilon(0.02));
  CHECK(f.rms < 0.5);
  CHECK(std::isinf(fit_circle(std::vector<Cell>{{0, 0}, {1, 1}, {2, 2}}).rms));
}

TEST_CASE("gcslcc joins a dashed line") {
  Bitmap b(50, 10);
  for (int x = 0; x < 50; ++x)
    if (x % 10 < 6) b.set(x, 4);
  const auto r = gcslcc_extrapolate(b);
  REQUIRE(r.groups.size() == 1);
  CHECK(r.groups[0].kind == GlobalKind::line);
  CHECK(r.groups[0].sources.size() == 5);
  CHECK(components(r.image, Connectivity::eight).size() == 1);
  for (int x = 0; x < 46; ++x) CHECK(r.image.get(x, 4));
}

TEST_CASE("gcslcc completes a circle from three arcs") {
  CellSet s;
  testfx::midpoint_arc(s, 25, 25, 14, 0, 80);
  testfx::midpoint_arc(s, 25, 25, 14, 120, 200);
  testfx::midpoint_arc(s, 25, 25, 14, 240, 320);
  const auto r = gcslcc_extrapolate(binarize(testfx::raster_image(50, 50, s)));
  REQUIRE(r.groups.size() == 1);
  CHECK(r.groups[0].kind == GlobalKind::circle);
  CHECK(r.groups[0].sources.size() == 3);
  CHECK(r.groups[0].circle.radius == doctest::Approx(14.0).epsilon(0.05));
  CHECK(components(r.image, Connectivity::eight).size() == 1);
  // the completed circle fills the gaps
  CHECK(r.image.get(25 + static_cast<int>(std::lround(14 * std::cos(100 * kPi / 180))),
                    25 + static_cast<int>(std::lround(14 * std::sin(100 * kPi / 180)))));
}

TEST_CASE("gcslcc keeps unrelated strokes apart") {
  Bitmap b(40, 40);
  for (int x = 2; x < 15; ++x) b.set(x, 5);
  for (int y = 20; y < 35; ++y) b.set(30, y);
  const auto r = gcslcc_extrapolate(b);
  CHECK(r.groups.size() == 2);
  CHECK(r.image == b);
}

TEST_CASE("decompose: circle above a triangle") {
  CellSet s;
  testfx::midpoint_arc(s, 20, 12, 8, 0, 360);
  for (auto c : testfx::primitive_raster(PrimitiveKind::triangle, 20, 10)) s.insert({c.x, c.y + 22});
  const auto g = decompose(testfx::raster_image(40, 48, s));
  REQUIRE(g.seeds.size() == 2);
  CHECK(g.seeds[0].kind == PrimitiveKind::circle);
  CHECK(g.seeds[1].kind == PrimitiveKind::triangle);
  CHECK(g.seeds[0].cy < g.seeds[1].cy);
  CHECK(g.edge_count(Relation::aligned) == 1);
  CHECK(g.edge_count(Relation::group) == 0);
  std::size_t listed = 0;
  for (const auto& l : g.layers) listed += l.size();
  CHECK(listed == g.seeds.size());
}

TEST_CASE("decompose: blank image gives an empty graph") {
  const auto g = decompose(GridImage(16, 16, 0.0, Channel::smell));
  CHECK(g.seeds.empty());
  CHECK(g.edges.empty());
  CHECK(g.channel == Channel::smell);
  CHECK_THROWS_AS(decompose(GridImage()), EmptyImageError);
}

TEST_CASE("decompose: containment") {
  CellSet s;
  testfx::midpoint_arc(s, 25, 25, 16, 0, 360);
  for (auto c : testfx::primitive_raster(PrimitiveKind::square, 25, 6)) s.insert(c);
  const auto g = decompose(testfx::raster_image(50, 50, s));
  REQUIRE(g.seeds.size() == 2);
  REQUIRE(g.edge_count(Relation::contains) == 1);
  const auto& e = *std::find_if(g.edges.begin(), g.edges.end(), [](const SeedEdge& x) { return x.relation == Relation::contains; });
  CHECK(g.seeds[static_cast<std::size_t>(e.from)].kind == PrimitiveKind::circle);
  CHECK(g.seeds[static_cast<std::size_t>(e.to)].kind == PrimitiveKind::square);
  CHECK(g.seeds[static_cast<std::size_t>(e.from)].layer > g.seeds[static_cast<std::size_t>(e.to)].layer);
}

TEST_CASE("decompose removes a line crossing a circle") {
  CellSet s;
  testfx::midpoint_arc(s, 20, 20, 8, 0, 360);
  testfx::bresenham(s, 0, 20, 39, 20);
  const auto g = decompose(testfx::raster_image(40, 40, s));
  REQUIRE(g.seeds.size() == 1);
  CHECK(g.seeds[0].kind == PrimitiveKind::circle);
  CHECK(g.seeds[0].cx == doctest::Approx(20.0).epsilon(0.05));
}

TEST_CASE("decompose is translation equivariant") {
  CellSet base;
  testfx::midpoint_arc(base, 12, 12, 7, 0, 360);
  testfx::bresenham(base, 24, 6, 34, 6);
  for (auto c : testfx::primitive_raster(PrimitiveKind::triangle, 30, 9)) base.insert({c.x, c.y + 10});
  const auto g0 = decompose(testfx::raster_image(48, 48, base));
  REQUIRE(g0.seeds.size() == 3);
  std::mt19937 rng(11);
  for (int i = 0; i < 5; ++i) {
    const int dx = static_cast<int>(rng() % 9), dy = static_cast<int>(rng() % 9);
    CellSet moved;
    for (auto c : base) moved.insert({c.x + dx, c.y + dy});
    const auto g = decompose(testfx::raster_image(60, 60, moved));
    REQUIRE(g.seeds.size() == g0.seeds.size());
    for (std::size_t k = 0; k < g.seeds.size(); ++k) {
      CHECK(g.seeds[k].kind == g0.seeds[k].kind);
      CHECK(g.seeds[k].cx == doctest::Approx(g0.seeds[k].cx + dx).epsilon(1e-12));
      CHECK(g.seeds[k].cy == doctest::Approx(g0.seeds[k].cy + dy).epsilon(1e-12));
      CHECK(g.seeds[k].scale == g0.seeds[k].scale);
    }
    CHECK(g.edges == g0.edges);
  }
}

TEST_CASE("seed layers and edges") {
  CHECK(seed_layer(2.0) == 0);
  CHECK(seed_layer(4.0) == 1);
  CHECK(seed_layer(8.0) == 2);
  CHECK(seed_layer(100.0) == 3);

  SeedGraph g;
  g.width = g.height = 100;
  auto seed = [](PrimitiveKind k, double x, double y, double sc, int group) {
    FractalSeed s;
    s.kind = k;
    s.cx = x;
    s.cy = y;
    s.scale = sc;
    s.group = group;
    s.layer = seed_layer(sc);
    s.box_min = {static_cast<int>(x - sc), static_cast<int>(y - sc)};
    s.box_max = {static_cast<int>(x + sc), static_cast<int>(y + sc)};
    return s;
  };
  g.seeds = {seed(PrimitiveKind::circle, 50, 50, 20, 0), seed(PrimitiveKind::square, 50, 50, 5, 1),
             seed(PrimitiveKind::triangle, 90, 10, 4, 2)};
  link_seeds(g);
  CHECK(g.edge_count(Relation::contains) == 1);
  CHECK(g.edge_count(Relation::aligned) == 1);  // the concentric pair
  CHECK(g.edge_count(Relation::adjacent) == 0);
  CHECK(g.layers[3].size() == 1);
  CHECK(g.layers[1].size() == 2);
}

TEST_CASE("grammar completion adds seeds") {
  SeedGraph g;
  FractalSeed a;
  a.kind = PrimitiveKind::open_circle_2;
  a.cx = 10;
  a.cy = 10;
  a.scale = 4;
  g.seeds = {a};
  GrammarRule rule;
  rule.name = "cup to circle";
  rule.pattern = {PrimitiveKind::open_circle_2};
  FractalSeed done;
  done.kind = PrimitiveKind::circle;
  done.scale = 1.0;
  rule.completion = {done};
  CHECK(apply_grammar(g, {rule}) == 1);
  REQUIRE(g.seeds.size() == 2);
  CHECK(g.seeds[1].kind == PrimitiveKind::circle);
  CHECK(g.seeds[1].scale == 4.0);
  CHECK(g.seeds[1].cx == 10.0);
  CHECK(apply_grammar(g, {}) == 0);
}

TEST_CASE("seed graph json and dot") {
  CellSet s;
  testfx::midpoint_arc(s, 12, 12, 8, 0, 360);
  testfx::bresenham(s, 25, 5, 25, 20);
  auto img = testfx::raster_image(32, 32, s);
  img.set_channel(Channel::touch);
  const auto g = decompose(img);
  const auto text = seed_graph_to_json(g);
  const auto back = seed_graph_from_json(text);
  CHECK(seed_graph_to_json(back) == text);
  CHECK(back.channel == Channel::touch);
  CHECK(back.edges == g.edges);

  CHECK_THROWS_AS(seed_graph_from_json("{\"schema_version\": 2}"), SchemaError);
  CHECK_THROWS_AS(seed_graph_from_json("not json"), SchemaError);

  std::ostringstream dot;
  write_dot(dot, g);
  CHECK(dot.str().rfind("graph seeds {", 0) == 0);
  CHECK(dot.str().find("circle") != std::string::npos);
}

TEST_CASE("pulse train codec") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  std::vector<double> v(100);
  for (auto& x : v) x = u(rng);
  const auto t = encode_pulse_train(v);
  const auto back = decode_pulse_train(t);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) <= 1e-12);
  // brighter means shorter gaps
  const std::vector<double> pair{0.2, 0.9};
  const auto tp = encode_pulse_train(pair);
  CHECK(tp.gaps[1] < tp.gaps[0]);

  const std::vector<double> zero{0.0};
  CHECK_THROWS_AS(encode_pulse_train(zero), ZeroIntensityError);
  PulseParams clamp;
  clamp.clamp_zero = true;
  CHECK(encode_pulse_train(zero, clamp).gaps[0] < clamp.gap_max);
  const std::vector<double> over{1.2};
  CHECK_THROWS_AS(encode_pulse_train(over), RangeError);
}

TEST_CASE("colour chain codec") {
  const auto pink = encode_color({0.30, 0.22, 0.48});
  CHECK(pink.a == 1.0);
  CHECK(pink.b == doctest::Approx(0.48).epsilon(1e-12));
  CHECK(pink.c == doctest::Approx(0.1056).epsilon(1e-12));
  CHECK(pink.d == doctest::Approx(0.03168).epsilon(1e-12));
  const auto rgb = decode_color(pink);
  CHECK(std::abs(rgb.r - 0.30) <= 1e-12);
  CHECK(std::abs(rgb.g - 0.22) <= 1e-12);
  CHECK(std::abs(rgb.b - 0.48) <= 1e-12);

  CHECK_THROWS_AS(encode_color({0.5, 0.5, 0.5}), NormalizationError);
  CHECK_THROWS_AS(encode_color({-0.1, 0.6, 0.5}), NormalizationError);
  // pure blue has no red in the chain, the residual fills it
  const auto blue = decode_color(encode_color({0.0, 0.0, 1.0}));
  CHECK(blue.b == 1.0);
  CHECK(blue.r == 0.0);
  CHECK_THROWS_AS(decode_color(encode_color({0.5, 0.5, 0.0})), PreconditionError);
}
