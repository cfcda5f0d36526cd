#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ajo/argument_column.hpp"
#include "ajo/fractal_decomposition.hpp"
#include "ajo/resonance_chain.hpp"

namespace ajo {

// ---------------------------------------------------------------- seed -> frequency

// Each (channel, kind) pair owns one sub-band of the chain (flattened layer /
// triplet / sub-band order, wrapping when the chain is short). The k-th seed of
// a kind takes peak k of that sub-band; its pose nudges the frequency by
// 1e-7 per pose bucket so the peak itself still identifies the kind.
struct SeedTone {
  int seed = 0;  // index into graph.seeds
  PeakRef ref;
  double hz = 0.0;
};

inline constexpr double kPoseStep = 1e-7;
inline constexpr int kOrientationBuckets = 8;

int kind_slot(Channel channel, PrimitiveKind kind);
int pose_bucket(const FractalSeed& seed);
std::vector<SeedTone> seed_tones(const ResonanceChain& chain, const SeedGraph& graph);
std::vector<double> seed_frequencies(const ResonanceChain& chain, const SeedGraph& graph);

// Argument with peak sets taken from the two graphs' tones and the graphs kept as context.
Argument argument_from_graphs(const ResonanceChain& chain, SeedGraph if_graph, SeedGraph then_graph,
                              std::string label = {});

// ---------------------------------------------------------------- reply back

struct Response {
  int argument = 0;
  std::vector<PeakRef> matched;  // if-peaks hit by the query, sorted
};

struct ReplyBack {
  std::vector<Response> responses;  // by argument id
  int rounds = 1;
};

inline constexpr double kReplyMatchRelative = 1e-5;

// One broadcast: every argument holding an if-peak within `epsilon` (relative)
// of a query frequency answers. If-peak frequencies come from `chain`.
ReplyBack reply_back(const ArgumentColumn& column, const ResonanceChain& chain, std::span<const double> frequencies,
                     double epsilon = kReplyMatchRelative);

// ---------------------------------------------------------------- scoring

struct ScoreWeights {
  double kind = 0.5;
  double edge = 0.3;
  double pose = 0.2;
};

// Kind multiset Jaccard, edge (kind pair, relation) multiset Jaccard and pose
// agreement after centring and RMS scaling. When neither graph has edges the
// edge weight is spread over the other two terms. Different channels score 0.
double match_score(const SeedGraph& query, const SeedGraph& stored, const ScoreWeights& weights = {});
double kind_jaccard(const SeedGraph& a, const SeedGraph& b);
double edge_jaccard(const SeedGraph& a, const SeedGraph& b);
double pose_agreement(const SeedGraph& a, const SeedGraph& b);

// ---------------------------------------------------------------- umbrella and filter

// Climbs from each argument to the highest rules above it and returns every
// argument under those apexes, sorted. Arguments under no rule return themselves.
std::vector<int> umbrella_expand(const ArgumentColumn& column, std::span<const int> matches);

struct Claim {
  PeakRef slot;
  double hz = 0.0;
};

struct Candidate {
  int argument = 0;
  std::string label;
  double score = 0.0;
  std::vector<Claim> claims;  // then-set tones
};

inline constexpr double kClaimTolerance = 1e-12;

// Drops candidates whose claims disagree on a slot with a stronger candidate.
// Strength: earlier label in `preference`, then higher score, then lower id.
// Survivors keep their input order.
std::vector<Candidate> filter_contradictions(std::span<const Candidate> candidates,
                                             std::span<const std::string> preference = {});

// ---------------------------------------------------------------- ask

struct Query {
  std::variant<GridImage, SeedGraph> payload;
  int max_cycles = 8;
  double epsilon_converge = 0.02;

  static Query from_image(GridImage image, int max_cycles = 8);
  static Query from_graph(SeedGraph graph, int max_cycles = 8);
};

struct ScoredArgument {
  int argument = 0;
  double score = 0.0;
  bool matched = true;  // false when it entered through umbrella expansion
};

struct Answer {
  SeedGraph graph;
  std::vector<ScoredArgument> matched_arguments;  // first cycle, best first
  int cycles_used = 0;
  bool converged = false;
  int reply_rounds = 0;
};

struct AskParams {
  ScoreWeights weights;
  DecomposeParams decompose;
  std::vector<std::string> preference;
  double sibling_share = 0.5;    // umbrella siblings inherit this fraction of the best matched score
  double fuse_fraction = 0.5;    // candidates below this fraction of the best score are not fused
  double match_relative = kReplyMatchRelative;
};

Answer ask(const ArgumentColumn& column, const ResonanceChain& chain, const Query& query, const AskParams& params = {});

// Answer graph JSON plus a metadata block.
std::string answer_to_json(const Answer& answer);

}  // namespace ajo
