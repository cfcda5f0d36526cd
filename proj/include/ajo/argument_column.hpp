#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ajo/fractal_decomposition.hpp"
#include "ajo/resonance_chain.hpp"

namespace ajo {

enum class WriteMode { single_peak, paired };
const char* to_string(WriteMode m);
WriteMode parse_write_mode(const std::string& token);

struct Argument {
  int id = 0;
  std::vector<PeakRef> if_set;    // sorted, unique
  std::vector<PeakRef> then_set;  // sorted, unique
  int level = 0;
  double born_at = 0.0;
  std::string label;
  // Pattern context when the argument was learned from images or seed graphs.
  SeedGraph if_graph;
  SeedGraph then_graph;
};

struct CouplingRule {
  int id = 0;
  int level = 1;
  std::vector<int> members;            // entity ids one level down (arguments for level 1, rules above)
  std::vector<int> base;               // covered base argument ids, sorted
  std::vector<PeakRef> shared_peaks;   // peaks that induced the rule
  std::vector<PeakRef> then_set;       // union of the members' then-sets
};

struct PhaseRule {
  int cluster = 0;  // base argument id, or base count + rule index
  int size = 1;     // coupled arguments in the cluster
  double tau = 1.0; // seconds of sustained resonance before firing
};

struct RuleColumn {
  double tau0 = 1.0;
  std::vector<PhaseRule> rules;

  double tau(int cluster_size) const { return tau0 / cluster_size; }
};

struct ColumnParams {
  double tau0 = 1.0;
  int max_level = 8;
  double overtone_tolerance = 1e-9;  // relative, for depth-1 harmonic sharing
  double write_shift = 1e-6;         // relative pull of then-peaks toward the if-set per write
};

// Growth-law rule count for n base arguments: n^2 + 1 or n^4 + 1.
std::uint64_t growth_law(std::uint64_t n, WriteMode mode);

class ArgumentColumn {
 public:
  explicit ArgumentColumn(ResonanceChain pristine, ColumnParams params = {});

  const ResonanceChain& pristine() const { return pristine_; }
  const ResonanceChain& working() const { return working_; }
  const ColumnParams& params() const { return params_; }
  WriteMode mode() const { return mode_; }
  std::size_t size() const { return base_.size(); }
  bool empty() const { return base_.empty(); }

  const std::vector<Argument>& base() const { return base_; }
  const Argument& argument(int id) const { return base_.at(static_cast<std::size_t>(id)); }
  // Rules induced by shared peaks, ordered by level then discovery.
  const std::vector<CouplingRule>& rules() const { return rules_; }
  // Law-mandated rules with no sharing behind them; counted, not stored.
  std::uint64_t placeholder_count() const { return placeholders_; }
  // Sharing rules beyond the law's count, folded away.
  std::uint64_t merged_count() const { return merged_; }
  std::uint64_t rule_count() const { return rules_.size() + placeholders_; }
  const RuleColumn& rule_column() const { return rule_column_; }

  // Cluster ids: base arguments first, then rules.
  int cluster_count() const { return static_cast<int>(base_.size() + rules_.size()); }
  std::vector<int> cluster_base(int cluster) const;
  std::vector<PeakRef> cluster_then(int cluster) const;

  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

 private:
  friend ArgumentColumn& write_arguments(ArgumentColumn&, std::vector<Argument>, WriteMode);
  friend ArgumentColumn& remove_last_argument(ArgumentColumn&);
  friend void self_assemble(ArgumentColumn&);
  friend ArgumentColumn read_column(std::istream&, ResonanceChain, ColumnParams);

  // Validates, stamps and stores arguments and applies their peak shifts,
  // without regenerating the upper levels.
  void append(std::vector<Argument> args, WriteMode mode, bool keep_time = false);

  struct Move {
    PeakRef ref;
    double before = 0.0;
  };

  ResonanceChain pristine_;
  ResonanceChain working_;
  ColumnParams params_;
  WriteMode mode_ = WriteMode::single_peak;
  std::vector<Argument> base_;
  std::vector<std::vector<Move>> moves_;  // per write, for exact undo
  std::vector<CouplingRule> rules_;
  std::uint64_t placeholders_ = 0;
  std::uint64_t merged_ = 0;
  RuleColumn rule_column_;
  double time_ = 0.0;
};

// Appends the argument, shifts its then-peaks toward the if-set in the working
// chain and regenerates the upper levels. The first write fixes the mode.
ArgumentColumn& write_argument(ArgumentColumn& column, Argument arg, WriteMode mode = WriteMode::single_peak);
// Same result as writing one by one, with a single regeneration at the end.
ArgumentColumn& write_arguments(ArgumentColumn& column, std::vector<Argument> args,
                                WriteMode mode = WriteMode::single_peak);
// Undoes the most recent write exactly.
ArgumentColumn& remove_last_argument(ArgumentColumn& column);
void self_assemble(ArgumentColumn& column);

struct WriteSite {
  int layer = 0;          // beat-maximal layer
  int triplet = 0;
  int sub = 0;
  PeakRef peak;           // strongest responding peak
  double query_hz = 0.0;  // the unmatched frequency that produced it
  double amplitude = 0.0;
  double beat_hz = 0.0;
  int upper_layer = 0;    // one step up the chain (alternative reading of the site)
};

// Frequencies already present in the working chain are rejected; the rest
// drive every peak and the strongest driven response marks the site.
// Ties go to the lower layer, then the lower peak id.
WriteSite locate_write_site(const ArgumentColumn& column, std::span<const double> frequencies,
                            double match_relative = 1e-6);

struct PhaseStep {
  std::vector<int> fired;        // clusters whose then-set activates
  std::vector<int> deactivated;  // lost a contention on shared then-peaks
  std::vector<int> active;       // surviving active clusters
  std::vector<PeakRef> then_peaks;
};

// Every active cluster held for at least tau(size) fires. Candidates whose
// then-sets share a peak contend; the higher region density wins, then the
// lower cluster id.
PhaseStep phase_transition_step(const ArgumentColumn& column, const RuleColumn& rules, std::span<const int> active,
                                double elapsed);

// Coupling rules lying entirely inside the region, per region argument.
double region_density(std::span<const CouplingRule> rules, std::span<const int> region);
double region_density(const ArgumentColumn& column, std::span<const int> region);

inline constexpr int kColumnFormatVersion = 1;

// Text format: header with version, chain hash, n and mode, then one block per
// argument. Coupling rules are regenerated on load.
void write_column(std::ostream& out, const ArgumentColumn& column);
ArgumentColumn read_column(std::istream& in, ResonanceChain pristine, ColumnParams params = {});

}  // namespace ajo
