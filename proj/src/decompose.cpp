#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "ajo/errors.hpp"
#include "ajo/fractal_decomposition.hpp"
#include "json.hpp"

namespace ajo {

namespace {

constexpr std::array<const char*, 4> kRelationNames{"contains", "adjacent", "aligned", "group"};

using ClassCache = std::map<std::vector<Cell>, Classification>;

const Classification& classify_cached(ClassCache& cache, std::vector<Cell> cells) {
  std::sort(cells.begin(), cells.end());
  auto it = cache.find(cells);
  if (it == cache.end()) {
    auto cls = classify_primitive(cells);
    it = cache.emplace(std::move(cells), cls).first;
  }
  return it->second;
}

FractalSeed make_seed(const Classification& c, std::span<const Cell> cells, int group, const Bitmap& frame) {
  FractalSeed s;
  s.kind = c.kind;
  s.cx = std::clamp(c.cx, 0.0, static_cast<double>(frame.width - 1));
  s.cy = std::clamp(c.cy, 0.0, static_cast<double>(frame.height - 1));
  s.scale = c.scale;
  s.orientation = c.orientation;
  s.score = c.score;
  s.group = group;
  s.layer = seed_layer(c.scale);
  s.box_min = cells.front();
  s.box_max = cells.front();
  for (auto q : cells) {
    s.box_min = {std::min(s.box_min.x, q.x), std::min(s.box_min.y, q.y)};
    s.box_max = {std::max(s.box_max.x, q.x), std::max(s.box_max.y, q.y)};
  }
  return s;
}

bool box_contains(const FractalSeed& outer, const FractalSeed& inner) {
  const bool inside = outer.box_min.x <= inner.box_min.x && outer.box_min.y <= inner.box_min.y &&
                      outer.box_max.x >= inner.box_max.x && outer.box_max.y >= inner.box_max.y;
  const bool same = outer.box_min == inner.box_min && outer.box_max == inner.box_max;
  return inside && !same;
}

// Seeds for one group: the whole group if it fits a primitive well, else its
// direction-continuous strokes.
void seed_group(const Bitmap& cleaned, const std::vector<Cell>& cells, int group, const DecomposeParams& params,
                ClassCache& cache, std::vector<FractalSeed>& out) {
  if (cells.size() < 3) return;
  const auto& whole = classify_cached(cache, cells);
  const Bitmap own = from_cells(cleaned.width, cleaned.height, cells);
  const bool has_junction = std::any_of(cells.begin(), cells.end(), [&](Cell c) { return is_junction(own, c.x, c.y); });
  if (whole.score >= params.accept_score || !has_junction) {
    out.push_back(make_seed(whole, cells, group, cleaned));
    return;
  }
  const auto strokes = trace_strokes(own, params.jidt);
  std::vector<FractalSeed> parts;
  double total = 0.0;
  for (const auto& s : strokes) {
    if (s.cells.size() < 3) continue;
    const auto& c = classify_cached(cache, s.cells);
    parts.push_back(make_seed(c, s.cells, group, cleaned));
    total += c.score;
  }
  if (parts.size() > 1 && total / static_cast<double>(parts.size()) > whole.score)
    out.insert(out.end(), parts.begin(), parts.end());
  else
    out.push_back(make_seed(whole, cells, group, cleaned));
}

std::vector<FractalSeed> seeds_with_cache(const Bitmap& cleaned, Geometry geometry, const DecomposeParams& params,
                                          ClassCache& cache) {
  std::vector<std::vector<Cell>> groups;
  if (geometry == Geometry::rectangular) {
    groups = components(cleaned, Connectivity::eight);
  } else {
    int anchor_row = cleaned.height;
    for (auto c : cleaned.cells()) anchor_row = std::min(anchor_row, c.y);
    for (const auto& band : components(dilate(cleaned, 1), Connectivity::hex6, anchor_row)) {
      std::vector<Cell> cells;
      for (auto c : band)
        if (cleaned.get(c)) cells.push_back(c);
      if (!cells.empty()) groups.push_back(std::move(cells));
    }
  }
  std::vector<FractalSeed> out;
  for (std::size_t g = 0; g < groups.size(); ++g) seed_group(cleaned, groups[g], static_cast<int>(g), params, cache, out);
  return out;
}

}  // namespace

const char* to_string(Relation r) { return kRelationNames[static_cast<std::size_t>(r)]; }

Relation parse_relation(const std::string& token) {
  for (std::size_t i = 0; i < kRelationNames.size(); ++i)
    if (token == kRelationNames[i]) return static_cast<Relation>(i);
  throw SchemaError("unknown relation '" + token + "'");
}

std::size_t SeedGraph::edge_count(Relation r) const {
  return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [&](const SeedEdge& e) { return e.relation == r; }));
}

int seed_layer(double scale) {
  if (!(scale > 0.0)) return 0;
  return std::clamp(static_cast<int>(std::floor(std::log2(scale))) - 1, 0, kPyramidLevels - 1);
}

void link_seeds(SeedGraph& graph, const EdgeParams& params) {
  graph.edges.clear();
  for (auto& l : graph.layers) l.clear();
  for (std::size_t i = 0; i < graph.seeds.size(); ++i) {
    graph.seeds[i].id = static_cast<int>(i);
    graph.layers[static_cast<std::size_t>(std::clamp(graph.seeds[i].layer, 0, kPyramidLevels - 1))].push_back(static_cast<int>(i));
  }
  for (std::size_t i = 0; i < graph.seeds.size(); ++i)
    for (std::size_t j = i + 1; j < graph.seeds.size(); ++j) {
      const auto& a = graph.seeds[i];
      const auto& b = graph.seeds[j];
      const int ia = static_cast<int>(i), jb = static_cast<int>(j);
      if (box_contains(a, b))
        graph.edges.push_back({ia, jb, Relation::contains});
      else if (box_contains(b, a))
        graph.edges.push_back({jb, ia, Relation::contains});
      else if (std::hypot(a.cx - b.cx, a.cy - b.cy) <= params.adjacency_scales * std::max(a.scale, b.scale))
        graph.edges.push_back({ia, jb, Relation::adjacent});
      if (std::abs(a.cx - b.cx) <= params.align_tolerance || std::abs(a.cy - b.cy) <= params.align_tolerance)
        graph.edges.push_back({ia, jb, Relation::aligned});
      if (a.group == b.group) graph.edges.push_back({ia, jb, Relation::group});
    }
}

int apply_grammar(SeedGraph& graph, const GrammarBook& book) {
  int added = 0;
  std::vector<bool> used(graph.seeds.size(), false);
  for (const auto& rule : book) {
    if (rule.pattern.empty()) continue;
    std::vector<std::size_t> match;
    for (auto kind : rule.pattern) {
      for (std::size_t i = 0; i < used.size(); ++i)
        if (!used[i] && graph.seeds[i].kind == kind && std::find(match.begin(), match.end(), i) == match.end()) {
          match.push_back(i);
          break;
        }
    }
    if (match.size() != rule.pattern.size()) continue;
    double cx = 0.0, cy = 0.0, scale = 0.0;
    for (auto i : match) {
      used[i] = true;
      cx += graph.seeds[i].cx;
      cy += graph.seeds[i].cy;
      scale += graph.seeds[i].scale;
    }
    const double n = static_cast<double>(match.size());
    cx /= n;
    cy /= n;
    scale /= n;
    for (auto s : rule.completion) {
      s.cx = cx + s.cx * scale;
      s.cy = cy + s.cy * scale;
      s.scale *= scale;
      s.layer = seed_layer(s.scale);
      s.group = graph.seeds[match.front()].group;
      s.channel = graph.channel;
      const double r = s.scale;
      s.box_min = {static_cast<int>(std::floor(s.cx - r)), static_cast<int>(std::floor(s.cy - r))};
      s.box_max = {static_cast<int>(std::ceil(s.cx + r)), static_cast<int>(std::ceil(s.cy + r))};
      graph.seeds.push_back(s);
      ++added;
    }
  }
  return added;
}

std::vector<FractalSeed> universe_seeds(const Bitmap& cleaned, Geometry geometry, const DecomposeParams& params) {
  ClassCache cache;
  return seeds_with_cache(cleaned, geometry, params, cache);
}

std::vector<FractalSeed> merge_universes(std::span<const FractalSeed> a, std::span<const FractalSeed> b) {
  std::vector<FractalSeed> out(a.begin(), a.end());
  int group_offset = 0;
  for (const auto& s : a) group_offset = std::max(group_offset, s.group + 1);
  for (auto s : b) {
    const bool dup = std::any_of(out.begin(), out.end(), [&](const FractalSeed& r) {
      return r.kind == s.kind && std::abs(r.cx - s.cx) <= 1.0 && std::abs(r.cy - s.cy) <= 1.0 &&
             std::abs(r.scale - s.scale) <= 0.1 * std::max(r.scale, s.scale);
    });
    if (dup) continue;
    s.group += group_offset;
    out.push_back(s);
  }
  return out;
}

Bitmap prepare_for_seeding(const GridImage& image, const DecomposeParams& params) {
  Bitmap b = outline_solids(binarize(image));
  b = csbsl_pipeline(to_image(b, image.channel()), 1, params.csbsl).skeleton;
  if (params.denoise) b = jidt_denoise(b, params.jidt).signal_image;
  if (params.extrapolate) b = thin(gcslcc_extrapolate(b, params.gcslcc).image);
  return b;
}

SeedGraph decompose(const GridImage& image, const DecomposeParams& params) {
  if (image.empty()) throw EmptyImageError("cannot decompose an empty image");
  SeedGraph graph;
  graph.width = image.width();
  graph.height = image.height();
  graph.channel = image.channel();
  const Bitmap cleaned = prepare_for_seeding(image, params);
  ClassCache cache;
  const auto rect = seeds_with_cache(cleaned, Geometry::rectangular, params, cache);
  const auto hex = seeds_with_cache(cleaned, Geometry::hexagonal, params, cache);
  graph.seeds = merge_universes(rect, hex);
  for (auto& s : graph.seeds) s.channel = image.channel();
  apply_grammar(graph, params.grammar);
  link_seeds(graph, params.edges);
  return graph;
}

std::string seed_graph_to_json(const SeedGraph& graph) {
  nlohmann::json j;
  j["schema_version"] = kSeedGraphSchema;
  j["width"] = graph.width;
  j["height"] = graph.height;
  j["channel"] = to_string(graph.channel);
  j["seeds"] = nlohmann::json::array();
  for (const auto& s : graph.seeds)
    j["seeds"].push_back({{"id", s.id},
                          {"kind", to_string(s.kind)},
                          {"cx", s.cx},
                          {"cy", s.cy},
                          {"scale", s.scale},
                          {"orientation", s.orientation},
                          {"layer", s.layer},
                          {"score", s.score},
                          {"group", s.group},
                          {"box", {s.box_min.x, s.box_min.y, s.box_max.x, s.box_max.y}}});
  j["edges"] = nlohmann::json::array();
  for (const auto& e : graph.edges) j["edges"].push_back({{"from", e.from}, {"to", e.to}, {"relation", to_string(e.relation)}});
  j["layers"] = graph.layers;
  return j.dump();
}

SeedGraph seed_graph_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("seed graph is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != kSeedGraphSchema)
      throw SchemaError("unsupported seed graph schema " + j.at("schema_version").dump());
    SeedGraph g;
    g.width = j.at("width").get<int>();
    g.height = j.at("height").get<int>();
    g.channel = parse_channel(j.at("channel").get<std::string>());
    for (const auto& s : j.at("seeds")) {
      FractalSeed f;
      f.id = s.at("id").get<int>();
      f.kind = parse_primitive(s.at("kind").get<std::string>());
      f.cx = s.at("cx").get<double>();
      f.cy = s.at("cy").get<double>();
      f.scale = s.at("scale").get<double>();
      f.orientation = s.at("orientation").get<double>();
      f.layer = s.at("layer").get<int>();
      f.score = s.at("score").get<double>();
      f.group = s.at("group").get<int>();
      f.channel = g.channel;
      const auto box = s.at("box").get<std::vector<int>>();
      if (box.size() != 4) throw SchemaError("seed box needs 4 integers");
      f.box_min = {box[0], box[1]};
      f.box_max = {box[2], box[3]};
      g.seeds.push_back(f);
    }
    for (const auto& e : j.at("edges")) {
      SeedEdge edge{e.at("from").get<int>(), e.at("to").get<int>(), parse_relation(e.at("relation").get<std::string>())};
      if (edge.from < 0 || edge.to < 0 || static_cast<std::size_t>(std::max(edge.from, edge.to)) >= g.seeds.size())
        throw SchemaError("edge references a missing seed");
      g.edges.push_back(edge);
    }
    const auto layers = j.at("layers").get<std::vector<std::vector<int>>>();
    for (std::size_t k = 0; k < layers.size() && k < g.layers.size(); ++k) g.layers[k] = layers[k];
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed seed graph: ") + e.what());
  } catch (const PreconditionError& e) {
    throw SchemaError(e.what());
  }
}

void write_dot(std::ostream& out, const SeedGraph& graph) {
  out << "graph seeds {\n";
  for (const auto& s : graph.seeds)
    out << "  s" << s.id << " [label=\"" << to_string(s.kind) << "\\n(" << std::lround(s.cx) << "," << std::lround(s.cy)
        << ") x" << std::lround(s.scale) << " L" << s.layer << "\"];\n";
  for (const auto& e : graph.edges)
    out << "  s" << e.from << " -- s" << e.to << " [label=\"" << to_string(e.relation) << "\"];\n";
  out << "}\n";
}

// ---------------------------------------------------------------- encoders

PulseTrain encode_pulse_train(std::span<const double> intensities, const PulseParams& params) {
  if (!(params.gap_min > 0.0 && params.gap_max > params.gap_min))
    throw PreconditionError("pulse gaps need 0 < gap_min < gap_max");
  PulseTrain t;
  t.amplitude = params.amplitude;
  t.gaps.reserve(intensities.size());
  for (double v : intensities) {
    if (v == 0.0) {
      if (!params.clamp_zero) throw ZeroIntensityError("zero intensity has no pulse representation");
      v = params.zero_floor;
    }
    if (!(v > 0.0 && v <= 1.0)) throw RangeError("pulse intensity outside (0, 1]");
    t.gaps.push_back(params.gap_min + (1.0 - v) * (params.gap_max - params.gap_min));
  }
  return t;
}

std::vector<double> decode_pulse_train(const PulseTrain& train, const PulseParams& params) {
  std::vector<double> v;
  v.reserve(train.gaps.size());
  for (double g : train.gaps) {
    if (!(g > 0.0)) throw RangeError("pulse gaps must be > 0");
    v.push_back(1.0 - (g - params.gap_min) / (params.gap_max - params.gap_min));
  }
  return v;
}

ColorPulses encode_color(const Rgb& rgb) {
  if (!(rgb.r >= 0.0 && rgb.g >= 0.0 && rgb.b >= 0.0)) throw NormalizationError("colour fractions must be >= 0");
  if (std::abs(rgb.r + rgb.g + rgb.b - 1.0) > kColorSumTolerance) throw NormalizationError("colour fractions must sum to 1");
  ColorPulses p;
  p.a = 1.0;
  p.b = p.a * rgb.b;
  p.c = p.b * rgb.g;
  p.d = p.c * rgb.r;
  return p;
}

Rgb decode_color(const ColorPulses& p) {
  if (!(p.a > 0.0)) throw NormalizationError("reference pulse A must be > 0");
  Rgb rgb;
  rgb.b = p.b / p.a;
  if (p.b == 0.0) throw PreconditionError("blue-free colours leave the green/red ratio undetermined");
  rgb.g = p.c / p.b;
  rgb.r = p.c > 0.0 ? p.d / p.c : 1.0 - rgb.b - rgb.g;
  return rgb;
}

}  // namespace ajo
