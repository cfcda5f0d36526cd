#include "ajo/argument_column.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "ajo/errors.hpp"
#include "ajo/oscillator_dynamics.hpp"
#include "text_util.hpp"

namespace ajo {

namespace {

void normalise(std::vector<PeakRef>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

template <class T>
std::vector<T> set_union(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<T> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

struct Entity {
  int id = 0;
  std::vector<PeakRef> peaks;
  std::vector<int> base;
  std::vector<PeakRef> then;
};

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(a, b); }

// One level of assembly: entities that share a peak (or a depth-1 harmonic of
// one) are coupled. Returns the distinct member sets with their shared peaks.
std::vector<std::pair<std::vector<int>, std::vector<PeakRef>>> couple(const std::vector<Entity>& entities,
                                                                      const ResonanceChain& chain, double tol) {
  std::vector<PeakRef> refs;
  for (const auto& e : entities) refs.insert(refs.end(), e.peaks.begin(), e.peaks.end());
  normalise(refs);
  std::vector<double> freq(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) freq[i] = chain.peak(refs[i]).frequency;

  DisjointSets classes(refs.size());
  std::vector<std::size_t> by_freq(refs.size());
  std::iota(by_freq.begin(), by_freq.end(), 0u);
  std::sort(by_freq.begin(), by_freq.end(), [&](std::size_t a, std::size_t b) { return freq[a] < freq[b]; });
  for (std::size_t k = 0; k < by_freq.size(); ++k) {
    const std::size_t i = by_freq[k];
    for (std::size_t m = k + 1; m < by_freq.size() && close(freq[by_freq[m]], freq[i], tol); ++m)
      classes.unite(i, by_freq[m]);
    // first harmonic
    const double target = 2.0 * freq[i];
    auto it = std::lower_bound(by_freq.begin(), by_freq.end(), target * (1.0 - tol),
                               [&](std::size_t a, double v) { return freq[a] < v; });
    for (; it != by_freq.end() && close(freq[*it], target, tol); ++it) classes.unite(i, *it);
  }

  std::map<std::size_t, std::vector<int>> holders;  // class root -> entity indices
  for (std::size_t e = 0; e < entities.size(); ++e)
    for (const auto& p : entities[e].peaks) {
      const auto idx = static_cast<std::size_t>(std::lower_bound(refs.begin(), refs.end(), p) - refs.begin());
      auto& h = holders[classes.find(idx)];
      if (h.empty() || h.back() != static_cast<int>(e)) h.push_back(static_cast<int>(e));
    }

  std::vector<std::pair<std::vector<int>, std::vector<PeakRef>>> out;
  std::map<std::vector<int>, std::size_t> seen;
  for (auto& [root, members] : holders) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (members.size() < 2) continue;
    auto [it, fresh] = seen.try_emplace(members, out.size());
    if (fresh) out.push_back({members, {}});
    auto& shared = out[it->second].second;
    for (std::size_t i = 0; i < refs.size(); ++i)
      if (classes.find(i) == root) shared.push_back(refs[i]);
    normalise(shared);
  }
  return out;
}

PeakRef parse_ref(const std::string& tok, int line) {
  const auto parts = detail::split(tok, ':');
  if (parts.size() != 2) throw ParseError(line, "expected layer:peak, got '" + tok + "'");
  const auto l = detail::parse_int(parts[0]);
  const auto p = detail::parse_int(parts[1]);
  if (!l || !p) throw ParseError(line, "expected layer:peak, got '" + tok + "'");
  return {static_cast<int>(*l), static_cast<int>(*p)};
}

std::string format_refs(const std::vector<PeakRef>& refs) {
  std::string s;
  for (const auto& r : refs) s += " " + std::to_string(r.layer) + ":" + std::to_string(r.peak_id);
  return s;
}

}  // namespace

const char* to_string(WriteMode m) { return m == WriteMode::single_peak ? "single-peak" : "paired"; }

WriteMode parse_write_mode(const std::string& token) {
  if (token == "single-peak" || token == "single") return WriteMode::single_peak;
  if (token == "paired") return WriteMode::paired;
  throw PreconditionError("unknown write mode '" + token + "'");
}

std::uint64_t growth_law(std::uint64_t n, WriteMode mode) {
  if (n == 0) return 0;
  if (n > 0xffffffffull) throw SizeError("column too large for the growth law");
  const std::uint64_t sq = n * n;
  if (mode == WriteMode::single_peak) return sq + 1;
  if (sq > 0xffffffffull) throw SizeError("column too large for the paired growth law");
  return sq * sq + 1;
}

ArgumentColumn::ArgumentColumn(ResonanceChain pristine, ColumnParams params)
    : pristine_(pristine), working_(std::move(pristine)), params_(params) {
  if (!(params_.tau0 > 0.0)) throw PreconditionError("tau0 must be > 0");
  if (params_.max_level < 1) throw PreconditionError("max_level must be >= 1");
  rule_column_.tau0 = params_.tau0;
}

std::vector<int> ArgumentColumn::cluster_base(int cluster) const {
  if (cluster < 0 || cluster >= cluster_count()) throw PreconditionError("unknown cluster " + std::to_string(cluster));
  const auto n = static_cast<int>(base_.size());
  if (cluster < n) return {cluster};
  return rules_[static_cast<std::size_t>(cluster - n)].base;
}

std::vector<PeakRef> ArgumentColumn::cluster_then(int cluster) const {
  if (cluster < 0 || cluster >= cluster_count()) throw PreconditionError("unknown cluster " + std::to_string(cluster));
  const auto n = static_cast<int>(base_.size());
  if (cluster < n) return base_[static_cast<std::size_t>(cluster)].then_set;
  return rules_[static_cast<std::size_t>(cluster - n)].then_set;
}

void self_assemble(ArgumentColumn& column) {
  column.rules_.clear();
  column.placeholders_ = 0;
  column.merged_ = 0;
  column.rule_column_ = RuleColumn{column.params_.tau0, {}};
  const std::size_t n = column.base_.size();
  if (n == 0) return;

  std::vector<Entity> current;
  for (const auto& a : column.base_) current.push_back({a.id, set_union(a.if_set, a.then_set), {a.id}, a.then_set});

  for (int level = 1; level <= column.params_.max_level && current.size() >= 2; ++level) {
    const auto coupled = couple(current, column.working_, column.params_.overtone_tolerance);
    if (coupled.empty()) break;
    std::vector<Entity> next;
    for (const auto& [members, shared] : coupled) {
      CouplingRule r;
      r.id = static_cast<int>(column.rules_.size());
      r.level = level;
      r.shared_peaks = shared;
      Entity e;
      e.id = r.id;
      for (int m : members) {
        const auto& src = current[static_cast<std::size_t>(m)];
        r.members.push_back(src.id);
        e.peaks = set_union(e.peaks, src.peaks);
        e.base = set_union(e.base, src.base);
        e.then = set_union(e.then, src.then);
      }
      r.base = e.base;
      r.then_set = e.then;
      column.rules_.push_back(std::move(r));
      next.push_back(std::move(e));
    }
    current = std::move(next);
  }

  const std::uint64_t target = growth_law(n, column.mode_);
  if (column.rules_.size() > target) {
    column.merged_ = column.rules_.size() - target;
    column.rules_.resize(static_cast<std::size_t>(target));
  }
  column.placeholders_ = target - column.rules_.size();

  for (std::size_t i = 0; i < n; ++i) column.rule_column_.rules.push_back({static_cast<int>(i), 1, column.params_.tau0});
  for (const auto& r : column.rules_) {
    const int size = static_cast<int>(r.base.size());
    column.rule_column_.rules.push_back({static_cast<int>(n) + r.id, size, column.rule_column_.tau(size)});
  }
}

void ArgumentColumn::append(std::vector<Argument> args, WriteMode mode, bool keep_time) {
  std::map<PeakRef, double> freq;  // pending frequencies of this batch
  auto frequency = [&](const PeakRef& r) {
    auto it = freq.find(r);
    return it != freq.end() ? it->second : working_.peak(r).frequency;
  };
  std::vector<std::string> jsons;
  for (const auto& b : base_) jsons.push_back(seed_graph_to_json(b.if_graph) + seed_graph_to_json(b.then_graph));

  for (auto& arg : args) {
    normalise(arg.if_set);
    normalise(arg.then_set);
    if (arg.if_set.empty() || arg.then_set.empty()) throw PreconditionError("an argument needs non-empty if and then sets");
    for (const auto* set : {&arg.if_set, &arg.then_set})
      for (const auto& r : *set)
        if (!working_.has_peak(r))
          throw PreconditionError("argument references missing peak " + std::to_string(r.layer) + ":" +
                                  std::to_string(r.peak_id));
    if (!base_.empty() && mode != mode_) throw PreconditionError(std::string("column is in ") + to_string(mode_) + " mode");
    if (mode == WriteMode::paired && (arg.if_set.size() < 2 || arg.then_set.size() < 2))
      throw PreconditionError("paired mode needs at least two peaks in each of the if and then sets");

    auto json = seed_graph_to_json(arg.if_graph) + seed_graph_to_json(arg.then_graph);
    for (std::size_t i = 0; i < base_.size(); ++i)
      if (base_[i].if_set == arg.if_set && base_[i].then_set == arg.then_set && jsons[i] == json)
        throw DuplicateArgumentError("argument " + std::to_string(i) + " already stores these if/then sets");

    // pull each then-peak a small step toward the if-set's geometric centre
    double log_sum = 0.0;
    for (const auto& r : arg.if_set) log_sum += std::log(frequency(r));
    const double centre = std::exp(log_sum / static_cast<double>(arg.if_set.size()));
    std::vector<Move> moves;
    for (const auto& r : arg.then_set) {
      if (std::binary_search(arg.if_set.begin(), arg.if_set.end(), r)) continue;
      const double f = frequency(r);
      if (f == centre) continue;
      moves.push_back({r, f});
      freq[r] = f * (1.0 + params_.write_shift * (centre > f ? 1.0 : -1.0));
    }

    mode_ = mode;
    arg.id = static_cast<int>(base_.size());
    arg.level = 0;
    if (!keep_time) arg.born_at = time_;
    base_.push_back(std::move(arg));
    jsons.push_back(std::move(json));
    moves_.push_back(std::move(moves));
  }
  if (!freq.empty()) {
    const std::vector<std::pair<PeakRef, double>> shifts(freq.begin(), freq.end());
    working_ = shift_peaks(working_, shifts);
  }
}

ArgumentColumn& write_argument(ArgumentColumn& column, Argument arg, WriteMode mode) {
  std::vector<Argument> one;
  one.push_back(std::move(arg));
  return write_arguments(column, std::move(one), mode);
}

ArgumentColumn& write_arguments(ArgumentColumn& column, std::vector<Argument> args, WriteMode mode) {
  if (args.empty()) return column;
  // validate on a copy so a failing batch leaves the column untouched
  ArgumentColumn next = column;
  next.append(std::move(args), mode);
  self_assemble(next);
  column = std::move(next);
  return column;
}

ArgumentColumn& remove_last_argument(ArgumentColumn& column) {
  if (column.base_.empty()) throw EmptyColumnError("no argument to remove");
  std::vector<std::pair<PeakRef, double>> undo;
  const auto& moves = column.moves_.back();
  for (auto it = moves.rbegin(); it != moves.rend(); ++it) undo.emplace_back(it->ref, it->before);
  if (!undo.empty()) column.working_ = shift_peaks(column.working_, undo);
  column.moves_.pop_back();
  column.base_.pop_back();
  self_assemble(column);
  return column;
}

WriteSite locate_write_site(const ArgumentColumn& column, std::span<const double> frequencies, double match_relative) {
  if (frequencies.empty()) throw PreconditionError("no frequencies to write");
  const auto& chain = column.working();
  OscillatorNetwork net;
  for (const auto& ref : chain.peak_refs()) {
    const auto& p = chain.peak(ref);
    OscillatorState s;
    s.peak_ref = ref;
    s.natural_frequency = p.frequency;
    s.intensity = p.intensity;
    s.quality_factor = p.quality_factor;
    net.states.push_back(s);
  }
  bool found = false;
  WriteSite best;
  for (double q : frequencies) {
    for (const auto& r : beat_response(net, q, match_relative)) {
      const bool better = !found || r.amplitude > best.amplitude ||
                          (r.amplitude == best.amplitude && r.peak < best.peak);
      if (!better) continue;
      found = true;
      best.peak = r.peak;
      best.amplitude = r.amplitude;
      best.beat_hz = r.beat_frequency;
      best.query_hz = q;
    }
  }
  if (!found) throw NoSiteError("every frequency is already stored; nothing new to write");
  const auto loc = chain.locate(best.peak);
  best.layer = best.peak.layer;
  best.triplet = loc.triplet;
  best.sub = loc.sub;
  best.upper_layer = std::min(best.layer + 1, static_cast<int>(chain.layer_count()) - 1);
  return best;
}

double region_density(std::span<const CouplingRule> rules, std::span<const int> region) {
  if (region.empty()) throw PreconditionError("region must be non-empty");
  std::vector<int> r(region.begin(), region.end());
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
  std::size_t inside = 0;
  for (const auto& rule : rules)
    if (!rule.base.empty() && std::includes(r.begin(), r.end(), rule.base.begin(), rule.base.end())) ++inside;
  return static_cast<double>(inside) / static_cast<double>(r.size());
}

double region_density(const ArgumentColumn& column, std::span<const int> region) {
  return region_density(column.rules(), region);
}

PhaseStep phase_transition_step(const ArgumentColumn& column, const RuleColumn& rules, std::span<const int> active,
                                double elapsed) {
  std::vector<int> act(active.begin(), active.end());
  std::sort(act.begin(), act.end());
  act.erase(std::unique(act.begin(), act.end()), act.end());

  struct Candidate {
    int cluster;
    double density;
    std::vector<PeakRef> then;
  };
  std::vector<Candidate> candidates;
  for (int c : act) {
    const auto base = column.cluster_base(c);
    if (elapsed < rules.tau(static_cast<int>(base.size()))) continue;
    candidates.push_back({c, region_density(column, base), column.cluster_then(c)});
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.density > b.density || (a.density == b.density && a.cluster < b.cluster);
  });

  PhaseStep out;
  for (const auto& c : candidates) {
    const bool clash = std::any_of(c.then.begin(), c.then.end(), [&](const PeakRef& p) {
      return std::binary_search(out.then_peaks.begin(), out.then_peaks.end(), p);
    });
    if (clash) {
      out.deactivated.push_back(c.cluster);
      continue;
    }
    out.fired.push_back(c.cluster);
    out.then_peaks = set_union(out.then_peaks, c.then);
  }
  std::sort(out.fired.begin(), out.fired.end());
  std::sort(out.deactivated.begin(), out.deactivated.end());
  for (int c : act)
    if (!std::binary_search(out.deactivated.begin(), out.deactivated.end(), c)) out.active.push_back(c);
  return out;
}

void write_column(std::ostream& out, const ArgumentColumn& column) {
  out << "ajo-column " << kColumnFormatVersion << "\n";
  out << "chain " << hash_hex(chain_hash(column.pristine())) << "\n";
  out << "mode " << to_string(column.mode()) << "\n";
  out << "n " << column.size() << "\n";
  for (const auto& a : column.base()) {
    out << "arg " << detail::shortest(a.born_at) << " if:" << format_refs(a.if_set) << " then:" << format_refs(a.then_set)
        << "\n";
    if (!a.label.empty()) out << "label " << a.label << "\n";
    if (!a.if_graph.seeds.empty()) out << "if-graph " << seed_graph_to_json(a.if_graph) << "\n";
    if (!a.then_graph.seeds.empty()) out << "then-graph " << seed_graph_to_json(a.then_graph) << "\n";
  }
}

ArgumentColumn read_column(std::istream& in, ResonanceChain pristine, ColumnParams params) {
  ArgumentColumn column(std::move(pristine), params);
  std::string line;
  int lineno = 0;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw ParseError(lineno + 1, std::string("unexpected end of file, expected ") + what);
    ++lineno;
    return detail::split_ws(line);
  };
  auto tok = next("header");
  if (tok.size() != 2 || tok[0] != "ajo-column") throw ParseError(lineno, "not a column file");
  if (tok[1] != std::to_string(kColumnFormatVersion)) throw VersionError("unsupported column format version " + tok[1]);
  tok = next("chain hash");
  if (tok.size() != 2 || tok[0] != "chain") throw ParseError(lineno, "expected 'chain <hash>'");
  if (tok[1] != hash_hex(chain_hash(column.pristine())))
    throw VersionError("column was written against chain " + tok[1]);
  tok = next("mode");
  if (tok.size() != 2 || tok[0] != "mode") throw ParseError(lineno, "expected 'mode <mode>'");
  WriteMode mode;
  try {
    mode = parse_write_mode(tok[1]);
  } catch (const PreconditionError&) {
    throw ParseError(lineno, "unknown mode '" + tok[1] + "'");
  }
  tok = next("argument count");
  const auto n = tok.size() == 2 && tok[0] == "n" ? detail::parse_int(tok[1]) : std::nullopt;
  if (!n || *n < 0) throw ParseError(lineno, "expected 'n <count>'");

  std::vector<std::pair<int, Argument>> args;  // with their line numbers
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto space = t.find(' ');
    const std::string key = t.substr(0, space);
    const std::string rest = space == std::string::npos ? "" : t.substr(space + 1);
    if (key == "arg") {
      const auto parts = detail::split_ws(rest);
      const auto then_pos = std::find(parts.begin(), parts.end(), "then:");
      if (parts.size() < 2 || parts[1] != "if:" || then_pos == parts.end())
        throw ParseError(lineno, "expected 'arg <time> if: ... then: ...'");
      Argument a;
      const auto born = detail::parse_double(parts[0]);
      if (!born) throw ParseError(lineno, "bad time '" + parts[0] + "'");
      a.born_at = *born;
      for (auto it = parts.begin() + 2; it != then_pos; ++it) a.if_set.push_back(parse_ref(*it, lineno));
      for (auto it = then_pos + 1; it != parts.end(); ++it) a.then_set.push_back(parse_ref(*it, lineno));
      args.emplace_back(lineno, std::move(a));
    } else if (args.empty()) {
      throw ParseError(lineno, "'" + key + "' before any argument");
    } else if (key == "label") {
      args.back().second.label = rest;
    } else if (key == "if-graph" || key == "then-graph") {
      try {
        (key == "if-graph" ? args.back().second.if_graph : args.back().second.then_graph) = seed_graph_from_json(rest);
      } catch (const SchemaError& e) {
        throw ParseError(lineno, e.what());
      }
    } else {
      throw ParseError(lineno, "unknown key '" + key + "'");
    }
  }
  if (static_cast<long long>(args.size()) != *n)
    throw ParseError(lineno + 1, "expected " + std::to_string(*n) + " arguments, found " + std::to_string(args.size()));
  for (auto& [at, a] : args) {
    try {
      column.append({a}, mode, true);
    } catch (const Error& e) {
      throw ParseError(at, e.what());
    }
  }
  self_assemble(column);
  return column;
}

}  // namespace ajo
