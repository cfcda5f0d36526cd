#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ajo/image.hpp"

namespace ajo {

// The ten shape primitives. Only the first three are closed.
enum class PrimitiveKind {
  triangle,
  circle,
  square,
  open_triangle,
  open_rectangle,
  open_circle_1,  // 90 degree arc
  open_circle_2,  // 180 degree arc
  open_circle_3,  // 270 degree arc
  straight_line,
  junction
};

inline constexpr int kPrimitiveCount = 10;

const char* to_string(PrimitiveKind kind);
PrimitiveKind parse_primitive(const std::string& token);
inline bool is_closed(PrimitiveKind k) {
  return k == PrimitiveKind::triangle || k == PrimitiveKind::circle || k == PrimitiveKind::square;
}

struct Classification {
  PrimitiveKind kind = PrimitiveKind::straight_line;
  double orientation = 0.0;  // radians, reduced by the template's symmetry
  double score = 0.0;        // F1 overlap in [0, 1]
  double scale = 0.0;        // cells; radius for circles and arcs, half-length otherwise
  double aspect = 1.0;
  double cx = 0.0;           // template reference point (circle centre, box centre, ...)
  double cy = 0.0;
  std::array<double, kPrimitiveCount> kind_scores{};  // best score per kind
};

// Contour is a set of cells (order ignored). Throws TooSmallError below 3 cells.
Classification classify_primitive(std::span<const Cell> contour);

// Samples of a primitive drawn with the given pose, rounded to cells.
std::vector<Cell> render_primitive(PrimitiveKind kind, double cx, double cy, double scale, double orientation,
                                   double aspect = 1.0);

// ---------------------------------------------------------------- Cube

enum class Geometry { rectangular, hexagonal };
const char* to_string(Geometry g);

inline constexpr double kFusionTolerance = 1.0 / 256.0;
inline constexpr int kCubeSide = 8;

struct Cube {
  Geometry geometry = Geometry::rectangular;
  std::array<GridImage, 4> layers;  // 8x8, 4x4, 2x2, 1x1
  std::vector<int> fused;           // region label per bottom cell, row-major
  int region_count = 0;

  std::vector<int> region_sizes() const;
  int multi_cell_regions() const;
};

// Area-weighted box resampling.
GridImage resample(const GridImage& image, int width, int height);
std::vector<int> fuse_cells(const GridImage& layer, Geometry geometry, double tolerance = kFusionTolerance);

// Images that are not 8x8 are resampled to 8x8.
Cube build_cube(const GridImage& image, Geometry geometry, double tolerance = kFusionTolerance);
std::pair<Cube, Cube> build_dual(const GridImage& image, double tolerance = kFusionTolerance);

// Larger images: one cube per 8x8 tile (zero padded), tiles linked 4-adjacently.
struct CubeGrid {
  int columns = 0;
  int rows = 0;
  std::vector<Cube> cubes;  // row-major
  std::vector<std::pair<int, int>> adjacent;
};
CubeGrid build_cube_grid(const GridImage& image, Geometry geometry, double tolerance = kFusionTolerance);

// Live-neighbour counts under the three neighbourhoods evaluated together.
struct NeighbourhoodCounts {
  int von_neumann = 0;
  int moore = 0;
  int hex6 = 0;
};
NeighbourhoodCounts neighbourhood_counts(const Bitmap& b, Cell c, int anchor_row = 0);

// ---------------------------------------------------------------- groups

struct Group {
  std::vector<Cell> cells;
  int junctions = 0;
};

struct SplitResult {
  Bitmap original;
  std::vector<Group> ncg;  // no junction
  std::vector<Group> cg;   // touching curves
};

SplitResult split_groups(const Bitmap& bitmap);
SplitResult split_groups(const GridImage& image);

struct CsbslParams {
  int gap = 3;          // largest gap closed by the connect stage, cells
  int blur_levels = 3;
  int spur_length = 2;
};

struct CsbslResult {
  // [loop][stage]: connect, smooth, blur 1..B, skeleton
  std::vector<std::vector<GridImage>> stages;
  std::vector<std::vector<int>> group_counts;  // [loop][blur level]
  std::vector<int> most_probable_groups;       // per loop
  Bitmap skeleton;                             // last loop output

  static constexpr int fixed_stages = 3;
};

Bitmap connect_gaps(const Bitmap& bitmap, int gap);
CsbslResult csbsl_pipeline(const GridImage& image, int loops, const CsbslParams& params = {});

// Maximal strokes through junctions, paired by direction continuity.
struct Stroke {
  std::vector<Cell> cells;
  std::vector<int> junctions;  // junction cluster ids it passes through or ends at
  bool straight = false;
  double span = 0.0;           // projected length / image extent along the fitted direction
  bool crosses_other = false;
};

struct JidtParams {
  double straight_tolerance = 1.5;  // max perpendicular deviation, cells
  double span_fraction = 0.85;
};

struct JidtResult {
  std::vector<Stroke> strokes;
  std::vector<Group> signal;
  std::vector<Group> noise;
  Bitmap signal_image;
};

std::vector<Stroke> trace_strokes(const Bitmap& skeleton, const JidtParams& params = {});
JidtResult jidt_denoise(const Bitmap& bitmap, const JidtParams& params = {});

struct CircleFit {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
  double rms = 0.0;  // radial residual
};
CircleFit fit_circle(std::span<const Cell> cells);  // algebraic least squares

struct GcslccParams {
  double slope_tolerance = 0.06;  // radians
  double offset_tolerance = 1.5;  // cells
  double straight_tolerance = 1.0;
  double center_tolerance = 1.5;  // cells
  double radius_tolerance = 0.05; // relative
  double arc_residual = 1.0;
};

enum class GlobalKind { line, circle, other };

struct GlobalGroup {
  GlobalKind kind = GlobalKind::other;
  std::vector<Cell> cells;
  std::vector<int> sources;  // input component indices
  CircleFit circle;          // circle groups
};

struct GcslccResult {
  Bitmap image;
  std::vector<GlobalGroup> groups;
};

GcslccResult gcslcc_extrapolate(const Bitmap& bitmap, const GcslccParams& params = {});

// ---------------------------------------------------------------- seed graph

struct FractalSeed {
  int id = 0;
  PrimitiveKind kind = PrimitiveKind::straight_line;
  double cx = 0.0;
  double cy = 0.0;
  double scale = 1.0;
  double orientation = 0.0;
  int layer = 0;  // pyramid level, 0 = finest
  double score = 0.0;
  int group = 0;
  Channel channel = Channel::visual;
  Cell box_min;
  Cell box_max;
};

enum class Relation { contains, adjacent, aligned, group };
const char* to_string(Relation r);
Relation parse_relation(const std::string& token);

struct SeedEdge {
  int from = 0;
  int to = 0;
  Relation relation = Relation::adjacent;
  bool operator==(const SeedEdge&) const = default;
};

inline constexpr int kSeedGraphSchema = 1;
inline constexpr int kPyramidLevels = 4;

struct SeedGraph {
  int width = 0;
  int height = 0;
  Channel channel = Channel::visual;
  std::vector<FractalSeed> seeds;
  std::vector<SeedEdge> edges;
  std::array<std::vector<int>, kPyramidLevels> layers;

  std::size_t edge_count(Relation r) const;
};

int seed_layer(double scale);

struct EdgeParams {
  double adjacency_scales = 2.0;
  double align_tolerance = 1.5;
};

// Rebuilds edges and layer lists from the seeds.
void link_seeds(SeedGraph& graph, const EdgeParams& params = {});

// Completion rules: when every kind in `pattern` is present among unmatched
// seeds, the completion seeds are added relative to the matched centroid and
// mean scale.
struct GrammarRule {
  std::string name;
  std::vector<PrimitiveKind> pattern;
  std::vector<FractalSeed> completion;
};
using GrammarBook = std::vector<GrammarRule>;
int apply_grammar(SeedGraph& graph, const GrammarBook& book);

struct DecomposeParams {
  CsbslParams csbsl;
  JidtParams jidt;
  GcslccParams gcslcc;
  EdgeParams edges;
  double accept_score = 0.85;
  bool denoise = true;
  bool extrapolate = true;
  GrammarBook grammar;
};

// Seeds found by one universe before the union.
std::vector<FractalSeed> universe_seeds(const Bitmap& cleaned, Geometry geometry, const DecomposeParams& params = {});
// Union keeping the first of any pair with equal kind, centres within 1 cell and scales within 10%.
std::vector<FractalSeed> merge_universes(std::span<const FractalSeed> a, std::span<const FractalSeed> b);

Bitmap prepare_for_seeding(const GridImage& image, const DecomposeParams& params = {});
SeedGraph decompose(const GridImage& image, const DecomposeParams& params = {});

std::string seed_graph_to_json(const SeedGraph& graph);
SeedGraph seed_graph_from_json(const std::string& text);
void write_dot(std::ostream& out, const SeedGraph& graph);

// ---------------------------------------------------------------- encoders

struct PulseParams {
  double gap_min = 1e-3;  // seconds
  double gap_max = 3e-3;
  double amplitude = 1.0;
  bool clamp_zero = false;  // map v = 0 to zero_floor instead of failing
  double zero_floor = 1e-6;
};

struct PulseTrain {
  std::vector<double> gaps;
  double amplitude = 1.0;
};

PulseTrain encode_pulse_train(std::span<const double> intensities, const PulseParams& params = {});
std::vector<double> decode_pulse_train(const PulseTrain& train, const PulseParams& params = {});

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

// Amplitude ratio chain blue, green, red: A = 1, B = A*b, C = B*g, D = C*r.
struct ColorPulses {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
};

inline constexpr double kColorSumTolerance = 1e-9;

ColorPulses encode_color(const Rgb& rgb);
Rgb decode_color(const ColorPulses& pulses);

}  // namespace ajo
