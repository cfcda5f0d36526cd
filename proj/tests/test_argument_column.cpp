#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "ajo/argument_column.hpp"
#include "ajo/errors.hpp"
#include "doctest.h"
#include "test_fixtures.hpp"

using namespace ajo;

namespace {

const ResonanceChain& brain() {
  static const ResonanceChain chain = load_brain_model();
  return chain;
}

Argument arg(std::vector<PeakRef> if_set, std::vector<PeakRef> then_set) {
  Argument a;
  a.if_set = std::move(if_set);
  a.then_set = std::move(then_set);
  return a;
}

// Distinct random arguments; each peak used at most once so no sharing arises.
std::vector<Argument> disjoint_arguments(const ResonanceChain& chain, int n, int per_side, std::uint64_t seed) {
  auto refs = chain.peak_refs();
  std::mt19937_64 rng(seed);
  std::shuffle(refs.begin(), refs.end(), rng);
  std::vector<Argument> out;
  std::size_t k = 0;
  for (int i = 0; i < n; ++i) {
    Argument a;
    for (int j = 0; j < per_side; ++j) a.if_set.push_back(refs[k++]);
    for (int j = 0; j < per_side; ++j) a.then_set.push_back(refs[k++]);
    out.push_back(a);
  }
  return out;
}

}  // namespace

TEST_CASE("growth law values") {
  CHECK(growth_law(0, WriteMode::single_peak) == 0);
  CHECK(growth_law(1, WriteMode::single_peak) == 2);
  CHECK(growth_law(3, WriteMode::single_peak) == 10);
  CHECK(growth_law(2, WriteMode::paired) == 17);
  CHECK(growth_law(10, WriteMode::paired) == 10001);
}

TEST_CASE("rule count follows the growth law after every write") {
  SUBCASE("single-peak, random sharing") {
    ArgumentColumn column(brain());
    const auto refs = brain().peak_refs();
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<std::size_t> pick(0, 40);  // small pool, so arguments share peaks
    std::set<std::pair<PeakRef, PeakRef>> used;
    for (std::uint64_t n = 1; n <= 100;) {
      const PeakRef a = refs[pick(rng)], b = refs[pick(rng)];
      if (a == b || !used.insert({a, b}).second) continue;
      write_argument(column, arg({a}, {b}));
      REQUIRE(column.rule_count() == n * n + 1);
      ++n;
    }
    CHECK_FALSE(column.rules().empty());
  }
  SUBCASE("paired") {
    ArgumentColumn column(brain());
    const auto args = disjoint_arguments(brain(), 10, 2, 9);
    for (std::uint64_t n = 1; n <= 10; ++n) {
      write_argument(column, args[n - 1], WriteMode::paired);
      CHECK(column.rule_count() == n * n * n * n + 1);
    }
    CHECK_THROWS_AS(write_argument(column, arg({{0, 0}}, {{0, 1}}), WriteMode::paired), PreconditionError);
    CHECK_THROWS_AS(write_argument(column, disjoint_arguments(brain(), 11, 2, 9)[10], WriteMode::single_peak),
                    PreconditionError);
  }
}

TEST_CASE("self-assembly from shared peaks") {
  ArgumentColumn column(brain());
  const auto args = disjoint_arguments(brain(), 2, 1, 3);
  write_argument(column, args[0]);
  write_argument(column, args[1]);
  // disjoint: only law placeholders
  CHECK(column.rules().empty());
  CHECK(column.placeholder_count() == 5);

  ArgumentColumn shared(brain());
  write_argument(shared, arg({{2, 5}}, {{3, 1}}));
  write_argument(shared, arg({{2, 5}}, {{4, 7}}));
  REQUIRE(shared.rules().size() == 1);
  const auto& r = shared.rules()[0];
  CHECK(r.level == 1);
  CHECK(r.members == std::vector<int>{0, 1});
  CHECK(r.shared_peaks == std::vector<PeakRef>{{2, 5}});
  CHECK(r.then_set == std::vector<PeakRef>{{3, 1}, {4, 7}});
  CHECK(shared.rule_count() == 5);

  // idempotent
  const auto before = shared.rules().size();
  self_assemble(shared);
  self_assemble(shared);
  CHECK(shared.rules().size() == before);
  CHECK(shared.rules()[0].shared_peaks == r.shared_peaks);
}

TEST_CASE("pairwise sharing builds higher levels") {
  ArgumentColumn column(brain());
  write_argument(column, arg({{1, 0}}, {{1, 1}}));
  write_argument(column, arg({{1, 1}}, {{1, 2}}));
  write_argument(column, arg({{1, 2}}, {{1, 0}}));
  // level 1: the three pairs; they all carry the same three peaks, so one level-2 apex joins them
  std::vector<int> per_level(4, 0);
  for (const auto& r : column.rules()) ++per_level[static_cast<std::size_t>(r.level)];
  CHECK(per_level[1] == 3);
  CHECK(per_level[2] == 1);
  CHECK(per_level[3] == 0);
  CHECK(column.rule_count() == 10);
  for (const auto& r : column.rules())
    if (r.level > 1) CHECK(r.base == std::vector<int>{0, 1, 2});
}

TEST_CASE("first harmonic counts as sharing") {
  // find a peak whose double falls inside another sub-band, and put a peak exactly there
  const auto& chain = brain();
  PeakRef low{}, high{};
  double target = 0.0;
  bool found = false;
  for (const auto& r : chain.peak_refs()) {
    if (found) break;
    const double f2 = 2.0 * chain.peak(r).frequency;
    for (const auto& q : chain.peak_refs())
      if (q.layer != r.layer && chain.subband_of(q).contains(f2)) {
        low = r;
        high = q;
        target = f2;
        found = true;
        break;
      }
  }
  REQUIRE(found);
  const auto tuned = shift_peak(chain, high, target);
  std::vector<PeakRef> others;
  for (const auto& r : chain.peak_refs())
    if (r.layer != low.layer && r.layer != high.layer && others.size() < 2) others.push_back(r);
  REQUIRE(others.size() == 2);
  const PeakRef other1 = others[0], other2 = others[1];
  ArgumentColumn column(tuned);
  write_argument(column, arg({low}, {other1}));
  write_argument(column, arg({high}, {other2}));
  REQUIRE(column.rules().size() == 1);
  CHECK(column.rules()[0].shared_peaks == std::vector<PeakRef>{std::min(low, high), std::max(low, high)});
}

TEST_CASE("writes are reversible") {
  ArgumentColumn column(brain());
  const auto args = disjoint_arguments(brain(), 5, 1, 21);
  std::set<PeakRef> expected;
  for (const auto& a : args) {
    write_argument(column, a);
    expected.insert(a.then_set.begin(), a.then_set.end());
  }
  const auto diff = diff_chains(column.pristine(), column.working());
  std::set<PeakRef> shifted;
  for (const auto& d : diff) shifted.insert(d.ref);
  CHECK(shifted == expected);
  CHECK(apply_deviations(column.pristine(), diff) == column.working());

  for (int i = 0; i < 5; ++i) remove_last_argument(column);
  CHECK(column.working() == column.pristine());
  CHECK(chain_hash(column.working()) == chain_hash(column.pristine()));
  CHECK(column.rule_count() == 0);
  CHECK_THROWS_AS(remove_last_argument(column), EmptyColumnError);
}

TEST_CASE("write errors") {
  ArgumentColumn column(brain());
  write_argument(column, arg({{0, 0}}, {{0, 9}}));
  CHECK_THROWS_AS(write_argument(column, arg({{0, 0}}, {{0, 9}})), DuplicateArgumentError);
  CHECK_THROWS_AS(write_argument(column, arg({}, {{0, 9}})), PreconditionError);
  CHECK_THROWS_AS(write_argument(column, arg({{0, 0}}, {{0, 9999}})), PreconditionError);

  ColumnParams wild;
  wild.write_shift = 0.9;
  ArgumentColumn pushy(brain(), wild);
  // the then-peak sits below the if-peak, so it is pushed up out of its sub-band
  CHECK_THROWS_AS(write_argument(pushy, arg({{11, 0}}, {{0, 0}})), OutOfBandError);
  CHECK(pushy.empty());
  CHECK(pushy.working() == pushy.pristine());
}

TEST_CASE("phase rules") {
  ArgumentColumn column(brain());
  write_argument(column, arg({{1, 0}}, {{1, 1}}));
  write_argument(column, arg({{1, 1}}, {{1, 2}}));
  write_argument(column, arg({{1, 2}}, {{1, 3}}));
  write_argument(column, arg({{1, 3}}, {{1, 0}}));
  const auto& rc = column.rule_column();
  CHECK(rc.rules.size() == column.size() + column.rules().size());
  for (const auto& a : rc.rules)
    for (const auto& b : rc.rules)
      if (a.size < b.size) CHECK(a.tau > b.tau);

  // a single argument fires exactly at tau0
  const std::vector<int> one{0};
  CHECK(phase_transition_step(column, rc, one, 1.0).fired == one);
  CHECK(phase_transition_step(column, rc, one, 0.999).fired.empty());

  // a cluster covering all four fires at tau0 / 4
  int apex = -1;
  for (const auto& r : column.rules())
    if (r.base.size() == 4) {
      apex = static_cast<int>(column.size()) + r.id;
      break;
    }
  REQUIRE(apex >= 0);
  const std::vector<int> big{apex};
  CHECK(phase_transition_step(column, rc, big, 0.25).fired == big);
  CHECK(phase_transition_step(column, rc, big, 0.2499).fired.empty());

  // deterministic
  const std::vector<int> all{0, 1, 2, 3, apex};
  const auto s1 = phase_transition_step(column, rc, all, 1.0);
  const auto s2 = phase_transition_step(column, rc, all, 1.0);
  CHECK(s1.fired == s2.fired);
  CHECK(s1.deactivated == s2.deactivated);
  CHECK_THROWS_AS(phase_transition_step(column, rc, std::vector<int>{999}, 1.0), PreconditionError);
}

TEST_CASE("contention goes to the denser region") {
  ArgumentColumn column(brain());
  // dense: three arguments coupled pairwise (and above); sparse: a lone pair
  write_argument(column, arg({{2, 0}}, {{2, 1}}));  // 0
  write_argument(column, arg({{2, 1}}, {{2, 2}}));  // 1
  write_argument(column, arg({{2, 2}}, {{2, 0}}));  // 2
  write_argument(column, arg({{5, 0}}, {{6, 3}}));  // 3
  write_argument(column, arg({{5, 0}}, {{6, 4}}));  // 4
  const int n = static_cast<int>(column.size());
  int dense = -1, sparse = -1;
  for (const auto& r : column.rules()) {
    if (r.base == std::vector<int>{0, 1, 2} && dense < 0) dense = n + r.id;
    if (r.base == std::vector<int>{3, 4}) sparse = n + r.id;
  }
  REQUIRE(dense >= 0);
  REQUIRE(sparse >= 0);
  const double d_dense = region_density(column, column.cluster_base(dense));
  const double d_sparse = region_density(column, column.cluster_base(sparse));
  CHECK(d_dense > d_sparse);

  // make both fire onto the same then-peak by sharing one: give the sparse pair argument 2's then-peak
  ArgumentColumn contest(brain());
  write_argument(contest, arg({{2, 0}}, {{7, 7}}));
  write_argument(contest, arg({{2, 1}}, {{7, 7}}));
  write_argument(contest, arg({{2, 0}}, {{2, 1}}));
  write_argument(contest, arg({{9, 0}}, {{7, 7}}));
  // clusters 0 and 3 both claim 7:7; 0 sits in a denser region
  const std::vector<int> active{0, 3};
  const auto step = phase_transition_step(contest, contest.rule_column(), active, 1.0);
  const double d0 = region_density(contest, std::vector<int>{0});
  const double d3 = region_density(contest, std::vector<int>{3});
  CHECK(d0 == d3);  // singletons: tie broken by id
  CHECK(step.fired == std::vector<int>{0});
  CHECK(step.deactivated == std::vector<int>{3});
  CHECK(step.active == std::vector<int>{0});
}

TEST_CASE("region density") {
  std::vector<CouplingRule> rules(3);
  rules[0].base = {0, 1};
  rules[1].base = {1, 2};
  rules[2].base = {0, 2};
  CHECK(region_density(rules, std::vector<int>{0}) == 0.0);
  CHECK(region_density(rules, std::vector<int>{0, 1, 2}) == doctest::Approx(1.0));
  CHECK(region_density(rules, std::vector<int>{0, 1}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(region_density(rules, std::vector<int>{}), PreconditionError);

  // brain column against an explicit enumeration
  ArgumentColumn column(brain());
  const auto refs = brain().peak_refs();
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> pick(0, 30);
  std::set<std::pair<PeakRef, PeakRef>> used;
  while (column.size() < 12) {
    const PeakRef a = refs[pick(rng)], b = refs[pick(rng)];
    if (a == b || !used.insert({a, b}).second) continue;
    write_argument(column, arg({a}, {b}));
  }
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> region;
    for (int i = 0; i < 12; ++i)
      if (coin(rng)) region.push_back(i);
    if (region.empty()) region.push_back(0);
    int inside = 0;
    for (const auto& r : column.rules()) {
      bool all = true;
      for (int b : r.base) all = all && std::find(region.begin(), region.end(), b) != region.end();
      inside += all;
    }
    CHECK(region_density(column, region) == doctest::Approx(static_cast<double>(inside) / region.size()));
  }
}

TEST_CASE("write-site localization") {
  ArgumentColumn column(brain());
  const auto& chain = column.working();
  // stored frequencies only: nothing to write
  const std::vector<double> stored{chain.peak({3, 4}).frequency, chain.peak({7, 0}).frequency};
  CHECK_THROWS_AS(locate_write_site(column, stored), NoSiteError);

  // one novel frequency just off a layer-3 self peak
  PeakRef ref{3, 0};
  for (const auto& r : chain.peak_refs())
    if (r.layer == 3 && chain.locate(r).sub == 1) {
      ref = r;
      break;
    }
  const std::vector<double> novel{chain.peak({3, 4}).frequency, chain.peak(ref).frequency * 1.001};
  const auto site = locate_write_site(column, novel);
  CHECK(site.layer == 3);
  CHECK(site.peak == ref);
  CHECK(site.upper_layer == 4);
  CHECK(site.query_hz == novel[1]);

  // a frequency near a peak that two layers share: the lower layer wins
  bool tested = false;
  for (const auto& a : chain.peak_refs()) {
    if (tested) break;
    for (const auto& b : chain.peak_refs())
      if (b.layer == a.layer + 1 && chain.peak(b).frequency == chain.peak(a).frequency) {
        const std::vector<double> q{chain.peak(a).frequency * 1.0005};
        CHECK(locate_write_site(column, q).layer == a.layer);
        tested = true;
        break;
      }
  }
  CHECK(tested);
}

TEST_CASE("column persistence") {
  ArgumentColumn column(brain());
  const auto args = disjoint_arguments(brain(), 5, 1, 77);
  for (std::size_t i = 0; i < args.size(); ++i) {
    column.set_time(0.5 * static_cast<double>(i));
    auto a = args[i];
    if (i == 2) a.label = "third one";
    write_argument(column, a);
  }
  std::ostringstream first;
  write_column(first, column);
  std::istringstream in(first.str());
  const auto loaded = read_column(in, brain());
  CHECK(loaded.rule_count() == 26);
  CHECK(loaded.working() == column.working());
  CHECK(loaded.base()[2].label == "third one");
  CHECK(loaded.base()[3].born_at == 1.5);
  std::ostringstream second;
  write_column(second, loaded);
  CHECK(second.str() == first.str());

  // truncated: the count line promises more arguments than remain; reported at end of input
  auto text = first.str();
  text.resize(text.rfind("arg "));
  std::istringstream cut(text);
  try {
    read_column(cut, brain());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 10);
  }

  std::istringstream bad_ref("ajo-column 1\nchain " + hash_hex(chain_hash(brain())) + "\nmode single-peak\nn 1\narg 0 if: 1:x then: 2:2\n");
  try {
    read_column(bad_ref, brain());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 5);
  }

  std::istringstream future("ajo-column 9\n");
  CHECK_THROWS_AS(read_column(future, brain()), VersionError);
  std::istringstream other(first.str());
  CHECK_THROWS_AS(read_column(other, testfx::ladder_chain(3)), VersionError);
}
