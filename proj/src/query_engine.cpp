#include "ajo/query_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "ajo/errors.hpp"
#include "json.hpp"

namespace ajo {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct SubBandAddress {
  int layer = 0;
  int first_peak = 0;
  int peaks = 0;
};

std::vector<SubBandAddress> flatten_subbands(const ResonanceChain& chain) {
  std::vector<SubBandAddress> out;
  for (std::size_t l = 0; l < chain.layer_count(); ++l) {
    int id = 0;
    for (const auto& t : chain.layer(static_cast<int>(l)).triplets)
      for (const auto& s : t.sub) {
        const int n = static_cast<int>(s.peaks.size());
        if (n > 0) out.push_back({static_cast<int>(l), id, n});
        id += n;
      }
  }
  return out;
}

// Rotational symmetry order used when comparing orientations.
int symmetry_order(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::triangle: return 3;
    case PrimitiveKind::square:
    case PrimitiveKind::junction: return 4;
    case PrimitiveKind::straight_line: return 2;
    case PrimitiveKind::circle: return 0;
    default: return 1;
  }
}

double orientation_period(PrimitiveKind k) {
  const int m = symmetry_order(k);
  return m == 0 ? 0.0 : 2.0 * kPi / m;
}

template <class Key>
double multiset_jaccard(const std::map<Key, int>& a, const std::map<Key, int>& b) {
  int inter = 0, uni = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

std::map<PrimitiveKind, int> kind_counts(const SeedGraph& g) {
  std::map<PrimitiveKind, int> m;
  for (const auto& s : g.seeds) ++m[s.kind];
  return m;
}

using EdgeKey = std::tuple<PrimitiveKind, PrimitiveKind, Relation>;

std::map<EdgeKey, int> edge_counts(const SeedGraph& g) {
  std::map<EdgeKey, int> m;
  for (const auto& e : g.edges) {
    PrimitiveKind a = g.seeds.at(static_cast<std::size_t>(e.from)).kind;
    PrimitiveKind b = g.seeds.at(static_cast<std::size_t>(e.to)).kind;
    if (e.relation != Relation::contains && b < a) std::swap(a, b);
    ++m[{a, b, e.relation}];
  }
  return m;
}

struct NormalPose {
  PrimitiveKind kind;
  double x, y, scale, orientation;
};

std::vector<NormalPose> normalise(const SeedGraph& g) {
  std::vector<NormalPose> out;
  if (g.seeds.empty()) return out;
  double mx = 0, my = 0, ms = 0;
  for (const auto& s : g.seeds) {
    mx += s.cx;
    my += s.cy;
    ms += s.scale;
  }
  const double n = static_cast<double>(g.seeds.size());
  mx /= n;
  my /= n;
  ms /= n;
  double rms = 0;
  for (const auto& s : g.seeds) rms += (s.cx - mx) * (s.cx - mx) + (s.cy - my) * (s.cy - my);
  rms = std::sqrt(rms / n);
  const double unit = rms > 1e-9 ? rms : (ms > 0 ? ms : 1.0);
  for (const auto& s : g.seeds) out.push_back({s.kind, (s.cx - mx) / unit, (s.cy - my) / unit, s.scale / unit, s.orientation});
  return out;
}

constexpr double kPoseSigma = 0.25;
constexpr double kScaleSigma = 0.25;

double pair_similarity(const NormalPose& a, const NormalPose& b) {
  const double d2 = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
  const double ls = std::log(std::max(a.scale, 1e-12) / std::max(b.scale, 1e-12));
  const int m = symmetry_order(a.kind);
  const double turn = m == 0 ? 1.0 : 0.5 * (1.0 + std::cos(m * (a.orientation - b.orientation)));
  return std::exp(-d2 / (2 * kPoseSigma * kPoseSigma)) * std::exp(-ls * ls / (2 * kScaleSigma * kScaleSigma)) * turn;
}

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Tones of a graph, or the raw then-peaks when the argument carries no graph.
std::vector<Claim> claims_of(const ResonanceChain& chain, const Argument& a) {
  std::vector<Claim> out;
  if (!a.then_graph.seeds.empty()) {
    for (const auto& t : seed_tones(chain, a.then_graph)) out.push_back({t.ref, t.hz});
  } else {
    for (const auto& r : a.then_set)
      if (chain.has_peak(r)) out.push_back({r, chain.peak(r).frequency});
  }
  return out;
}

// Appends b's seeds not already present in a (same kind, centre within 1 cell, scale within 10%).
void absorb(SeedGraph& into, const SeedGraph& from, double weight) {
  into.width = std::max(into.width, from.width);
  into.height = std::max(into.height, from.height);
  std::vector<FractalSeed> incoming = from.seeds;
  for (auto& s : incoming) s.score *= weight;
  auto merged = merge_universes(into.seeds, incoming);
  for (std::size_t i = 0; i < merged.size(); ++i) merged[i].id = static_cast<int>(i);
  into.seeds = std::move(merged);
}

}  // namespace

// ---------------------------------------------------------------- tones

int kind_slot(Channel channel, PrimitiveKind kind) {
  return static_cast<int>(channel) * kPrimitiveCount + static_cast<int>(kind);
}

int pose_bucket(const FractalSeed& seed) {
  const double period = orientation_period(seed.kind);
  int b = 0;
  if (period > 0.0) {
    double t = std::fmod(seed.orientation, period);
    if (t < 0) t += period;
    b = std::clamp(static_cast<int>(std::floor(t / period * kOrientationBuckets)), 0, kOrientationBuckets - 1);
  }
  return b + kOrientationBuckets * std::clamp(seed.layer, 0, kPyramidLevels - 1);
}

std::vector<SeedTone> seed_tones(const ResonanceChain& chain, const SeedGraph& graph) {
  const auto bands = flatten_subbands(chain);
  if (bands.empty()) throw PreconditionError("chain has no peaks");
  std::map<PrimitiveKind, int> seen;
  std::vector<SeedTone> out;
  for (std::size_t i = 0; i < graph.seeds.size(); ++i) {
    const auto& s = graph.seeds[i];
    const auto& band = bands[static_cast<std::size_t>(kind_slot(graph.channel, s.kind)) % bands.size()];
    const int k = seen[s.kind]++;
    const PeakRef ref{band.layer, band.first_peak + k % band.peaks};
    out.push_back({static_cast<int>(i), ref, chain.peak(ref).frequency * (1.0 + kPoseStep * pose_bucket(s))});
  }
  return out;
}

std::vector<double> seed_frequencies(const ResonanceChain& chain, const SeedGraph& graph) {
  std::vector<double> out;
  for (const auto& t : seed_tones(chain, graph)) out.push_back(t.hz);
  return out;
}

Argument argument_from_graphs(const ResonanceChain& chain, SeedGraph if_graph, SeedGraph then_graph,
                              std::string label) {
  Argument a;
  for (const auto& t : seed_tones(chain, if_graph)) a.if_set.push_back(t.ref);
  for (const auto& t : seed_tones(chain, then_graph)) a.then_set.push_back(t.ref);
  std::sort(a.if_set.begin(), a.if_set.end());
  a.if_set.erase(std::unique(a.if_set.begin(), a.if_set.end()), a.if_set.end());
  std::sort(a.then_set.begin(), a.then_set.end());
  a.then_set.erase(std::unique(a.then_set.begin(), a.then_set.end()), a.then_set.end());
  a.if_graph = std::move(if_graph);
  a.then_graph = std::move(then_graph);
  a.label = std::move(label);
  return a;
}

// ---------------------------------------------------------------- reply back

ReplyBack reply_back(const ArgumentColumn& column, const ResonanceChain& chain, std::span<const double> frequencies,
                     double epsilon) {
  if (frequencies.empty()) throw PreconditionError("reply_back needs at least one query frequency");
  struct Entry {
    double hz;
    int argument;
    PeakRef ref;
  };
  std::vector<Entry> index;
  for (const auto& a : column.base())
    for (const auto& r : a.if_set) index.push_back({chain.peak(r).frequency, a.id, r});
  std::sort(index.begin(), index.end(), [](const Entry& x, const Entry& y) {
    return std::tie(x.hz, x.argument, x.ref) < std::tie(y.hz, y.argument, y.ref);
  });

  std::map<int, std::set<PeakRef>> hits;
  for (double q : frequencies) {
    // |f - q| <= eps * max(f, q)  <=>  q / (1 + eps) <= f <= q * (1 + eps) for positive values
    const double lo = q / (1.0 + epsilon);
    const double hi = q * (1.0 + epsilon);
    auto it = std::lower_bound(index.begin(), index.end(), lo, [](const Entry& e, double v) { return e.hz < v; });
    for (; it != index.end() && it->hz <= hi; ++it) hits[it->argument].insert(it->ref);
  }
  ReplyBack out;
  for (auto& [id, refs] : hits) out.responses.push_back({id, {refs.begin(), refs.end()}});
  return out;
}

// ---------------------------------------------------------------- scoring

double kind_jaccard(const SeedGraph& a, const SeedGraph& b) { return multiset_jaccard(kind_counts(a), kind_counts(b)); }

double edge_jaccard(const SeedGraph& a, const SeedGraph& b) { return multiset_jaccard(edge_counts(a), edge_counts(b)); }

double pose_agreement(const SeedGraph& a, const SeedGraph& b) {
  const auto pa = normalise(a);
  const auto pb = normalise(b);
  const std::size_t denom = std::max(pa.size(), pb.size());
  if (denom == 0) return 1.0;
  struct Pair {
    double sim;
    std::size_t i, j;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pb.size(); ++j)
      if (pa[i].kind == pb[j].kind) pairs.push_back({pair_similarity(pa[i], pb[j]), i, j});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    return std::tie(y.sim, x.i, x.j) < std::tie(x.sim, y.i, y.j);
  });
  std::vector<char> used_a(pa.size(), 0), used_b(pb.size(), 0);
  double total = 0.0;
  for (const auto& p : pairs) {
    if (used_a[p.i] || used_b[p.j]) continue;
    used_a[p.i] = used_b[p.j] = 1;
    total += p.sim;
  }
  return total / static_cast<double>(denom);
}

double match_score(const SeedGraph& query, const SeedGraph& stored, const ScoreWeights& w) {
  if (query.seeds.empty() && stored.seeds.empty()) return 1.0;
  if (query.channel != stored.channel) return 0.0;
  const double k = kind_jaccard(query, stored);
  const double p = pose_agreement(query, stored);
  double score = 0.0;
  if (query.edges.empty() && stored.edges.empty()) {
    const double sum = w.kind + w.pose;
    score = sum > 0 ? (w.kind * k + w.pose * p) / sum : 0.0;
  } else {
    score = w.kind * k + w.edge * edge_jaccard(query, stored) + w.pose * p;
  }
  return std::clamp(score, 0.0, 1.0);
}

// ---------------------------------------------------------------- umbrella and filter

std::vector<int> umbrella_expand(const ArgumentColumn& column, std::span<const int> matches) {
  std::vector<int> out;
  const auto& rules = column.rules();
  for (int m : matches) {
    out.push_back(m);
    int top = 0;
    for (const auto& r : rules)
      if (std::binary_search(r.base.begin(), r.base.end(), m)) top = std::max(top, r.level);
    if (top == 0) continue;
    for (const auto& r : rules)
      if (r.level == top && std::binary_search(r.base.begin(), r.base.end(), m))
        out.insert(out.end(), r.base.begin(), r.base.end());
  }
  return sorted_unique(std::move(out));
}

std::vector<Candidate> filter_contradictions(std::span<const Candidate> candidates,
                                             std::span<const std::string> preference) {
  auto rank = [&](const Candidate& c) {
    const auto it = std::find(preference.begin(), preference.end(), c.label);
    return static_cast<std::size_t>(it - preference.begin());
  };
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const auto& a = candidates[x];
    const auto& b = candidates[y];
    const auto ra = rank(a), rb = rank(b);
    if (ra != rb) return ra < rb;
    if (a.score != b.score) return a.score > b.score;
    if (a.argument != b.argument) return a.argument < b.argument;
    return x < y;
  });
  std::map<PeakRef, double> held;
  std::vector<char> keep(candidates.size(), 0);
  for (std::size_t i : order) {
    const auto& c = candidates[i];
    const bool clash = std::any_of(c.claims.begin(), c.claims.end(), [&](const Claim& cl) {
      const auto it = held.find(cl.slot);
      return it != held.end() && std::abs(it->second - cl.hz) > kClaimTolerance * std::max(it->second, cl.hz);
    });
    if (clash) continue;
    keep[i] = 1;
    for (const auto& cl : c.claims) held.emplace(cl.slot, cl.hz);
  }
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (keep[i]) out.push_back(candidates[i]);
  return out;
}

// ---------------------------------------------------------------- ask

Query Query::from_image(GridImage image, int max_cycles) {
  Query q;
  q.payload = std::move(image);
  q.max_cycles = max_cycles;
  return q;
}

Query Query::from_graph(SeedGraph graph, int max_cycles) {
  Query q;
  q.payload = std::move(graph);
  q.max_cycles = max_cycles;
  return q;
}

Answer ask(const ArgumentColumn& column, const ResonanceChain& chain, const Query& query, const AskParams& params) {
  if (query.max_cycles < 1) throw PreconditionError("max_cycles must be at least 1");
  if (column.empty()) throw EmptyColumnError("no arguments have been learned");
  if (chain_hash(chain) != chain_hash(column.pristine()))
    throw PreconditionError("query chain does not match the column's chain");

  SeedGraph current = std::holds_alternative<GridImage>(query.payload)
                          ? decompose(std::get<GridImage>(query.payload), params.decompose)
                          : std::get<SeedGraph>(query.payload);

  Answer answer;
  answer.graph.channel = current.channel;
  while (answer.cycles_used < query.max_cycles) {
    ++answer.cycles_used;
    if (current.seeds.empty()) {
      answer.converged = true;
      break;
    }
    const auto tones = seed_frequencies(chain, current);
    const auto reply = reply_back(column, chain, tones, params.match_relative);
    answer.reply_rounds += reply.rounds;

    std::map<int, double> own;
    std::vector<int> matched;
    for (const auto& r : reply.responses) {
      matched.push_back(r.argument);
      own[r.argument] = match_score(current, column.argument(r.argument).if_graph, params.weights);
    }
    // Siblings under a shared apex inherit part of the matching argument's score.
    std::map<int, double> effective = own;
    for (int m : matched) {
      const std::vector<int> one{m};
      for (int s : umbrella_expand(column, one)) {
        if (own.count(s)) continue;
        const double inherited = params.sibling_share * own[m];
        auto [it, fresh] = effective.emplace(s, 0.0);
        if (fresh) it->second = match_score(current, column.argument(s).if_graph, params.weights);
        it->second = std::max(it->second, inherited);
      }
    }

    std::vector<ScoredArgument> scored;
    for (const auto& [id, sc] : effective) scored.push_back({id, sc, own.count(id) > 0});
    std::sort(scored.begin(), scored.end(), [](const ScoredArgument& a, const ScoredArgument& b) {
      return a.score != b.score ? a.score > b.score : a.argument < b.argument;
    });
    if (answer.cycles_used == 1) answer.matched_arguments = scored;

    const double best = scored.empty() ? 0.0 : scored.front().score;
    std::vector<Candidate> candidates;
    for (const auto& s : scored) {
      if (best <= 0.0 || s.score < params.fuse_fraction * best) continue;
      const auto& a = column.argument(s.argument);
      candidates.push_back({a.id, a.label, s.score, claims_of(chain, a)});
    }
    const auto kept = filter_contradictions(candidates, params.preference);

    SeedGraph fused;
    fused.channel = current.channel;
    for (const auto& c : kept) {
      const auto& g = column.argument(c.argument).then_graph;
      if (fused.seeds.empty()) fused.channel = g.channel;
      absorb(fused, g, c.score / best);
    }
    link_seeds(fused);

    const std::size_t before = answer.graph.seeds.size();
    if (answer.graph.seeds.empty()) answer.graph.channel = fused.channel;
    absorb(answer.graph, fused, 1.0);
    link_seeds(answer.graph);
    const std::size_t after = answer.graph.seeds.size();
    // previous answer is a subset of the new one, so the Jaccard change is the added share
    const double change = after == 0 ? 0.0 : static_cast<double>(after - before) / static_cast<double>(after);
    if (change < query.epsilon_converge) {
      answer.converged = true;
      break;
    }
    current = std::move(fused);
  }
  return answer;
}

std::string answer_to_json(const Answer& answer) {
  nlohmann::json j = nlohmann::json::parse(seed_graph_to_json(answer.graph));
  nlohmann::json meta;
  meta["cycles_used"] = answer.cycles_used;
  meta["converged"] = answer.converged;
  meta["reply_rounds"] = answer.reply_rounds;
  meta["scores"] = nlohmann::json::array();
  for (const auto& s : answer.matched_arguments)
    meta["scores"].push_back({{"argument", s.argument}, {"score", s.score}, {"matched", s.matched}});
  j["metadata"] = meta;
  return j.dump();
}

}  // namespace ajo
