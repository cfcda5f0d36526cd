#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

namespace ajo {

struct PatternGraph {
  std::vector<double> labels;               // resonance label per node, Hz
  std::vector<std::pair<int, int>> edges;   // a < b, sorted, unique
  std::uint64_t rng_seed = 0;

  int size() const { return static_cast<int>(labels.size()); }
  bool has_edge(int a, int b) const;
  std::vector<std::vector<int>> adjacency() const;
};

// Discrete label symbols, log-spaced over [lo, hi].
struct LabelBand {
  double lo = 1000.0;
  double hi = 8000.0;
  int symbols = 4;

  std::vector<double> values() const;
};

PatternGraph gen_network(int n, double p, std::uint64_t seed, const LabelBand& band = {});

struct Planted {
  PatternGraph graph;
  std::vector<int> placement;  // pattern node i sits on graph node placement[i]
};

// Overwrites labels and adds the pattern's edges on a random injective placement.
Planted embed_pattern(const PatternGraph& graph, const PatternGraph& pattern, std::uint64_t seed);

// A match maps pattern node i to graph node m[i]; lists are sorted.
using Match = std::vector<int>;

struct BruteForceLimits {
  int max_pattern = 6;
  int max_graph = 14;
};

// Every injective, label-equal, edge-preserving placement (edges need not be induced).
std::vector<Match> solve_bruteforce(const PatternGraph& graph, const PatternGraph& pattern,
                                    const BruteForceLimits& limits = {});

struct ReplyBackResult {
  std::vector<Match> matches;
  int label_rounds = 1;     // one broadcast of the pattern's labels
  int assembly_passes = 0;  // local joins along graph edges
  int rounds_used() const { return label_rounds + assembly_passes; }
};

ReplyBackResult solve_reply_back(const PatternGraph& graph, const PatternGraph& pattern);

struct BenchConfig {
  std::vector<int> n_list{6, 8, 10, 12};
  std::vector<double> p_list{0.3};
  std::vector<int> pattern_sizes{3, 4};
  int trials = 5;
  bool verify = true;
  bool timing = true;  // false writes 0 for wall times so reports compare byte for byte
  std::uint64_t seed = 1;
  double pattern_p = 0.7;
  LabelBand labels;
};

// key=value lines, '#' comments. Lists are comma separated.
BenchConfig parse_bench_config(std::istream& in);
void validate_bench_config(const BenchConfig& config);

struct BenchRow {
  int n = 0;
  double p = 0.0;
  int pattern_size = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  int label_rounds = 0;
  int assembly_passes = 0;
  int rounds = 0;
  double reply_ms = 0.0;
  double brute_ms = 0.0;
  std::size_t reply_matches = 0;
  std::size_t brute_matches = 0;
  bool verified = false;
  bool agreement = false;
  bool planted_found = false;
};

std::vector<BenchRow> run_bench(const BenchConfig& config);

inline constexpr const char* kBenchHeader =
    "n,p,pattern_size,trial,seed,label_rounds,assembly_passes,rounds,reply_ms,brute_ms,reply_matches,brute_matches,"
    "verified,agreement,planted_found";

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace ajo
