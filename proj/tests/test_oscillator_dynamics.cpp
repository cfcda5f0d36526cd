#include <cmath>
#include <numbers>
#include <sstream>

#include "ajo/errors.hpp"
#include "ajo/oscillator_dynamics.hpp"
#include "doctest.h"
#include "test_fixtures.hpp"

using namespace ajo;

namespace {

// Hand-built network on a single layer with explicit couplings.
OscillatorNetwork manual_network(std::vector<double> freqs, std::vector<Coupling> edges, double energy = 1.0) {
  OscillatorNetwork net;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    OscillatorState s;
    s.peak_ref = {0, static_cast<int>(i)};
    s.natural_frequency = freqs[i];
    s.energy = energy;
    net.states.push_back(s);
    net.layer_of.push_back(0);
  }
  net.coupling = CouplingMatrix(freqs.size(), std::move(edges));
  net.layer_period = {1.0};
  net.layer_time = {0.0};
  return net;
}

double phase_gap(const OscillatorNetwork& net) {
  double d = std::abs(net.states[0].phase - net.states[1].phase);
  return std::min(d, 2 * std::numbers::pi - d);
}

}  // namespace

TEST_CASE("two equal-frequency oscillators lock") {
  auto net = manual_network({1.0, 1.0}, {{0, 1, 1.0}});
  net.states[0].phase = 0.3;
  net.states[1].phase = 2.5;
  double prev = phase_gap(net);
  bool monotone = true;
  long steps = 0;
  while (phase_gap(net) >= 1e-6 && steps < 100000) {
    step(net, 0.01);
    const double g = phase_gap(net);
    monotone = monotone && g <= prev;
    prev = g;
    ++steps;
  }
  CHECK(phase_gap(net) < 1e-6);
  CHECK(monotone);
  CHECK(order_parameter(net) >= 0.999);
}

TEST_CASE("uncoupled phases advance by 2 pi f dt") {
  auto net = manual_network({3.0, 7.5}, {});
  net.states[0].phase = 0.1;
  net.states[1].phase = 0.2;
  const double dt = 0.001;
  step(net, dt);
  CHECK(net.states[0].phase == 0.1 + 2 * std::numbers::pi * 3.0 * dt);
  CHECK(net.states[1].phase == 0.2 + 2 * std::numbers::pi * 7.5 * dt);
  CHECK(net.time == dt);
}

TEST_CASE("step enforces the stability bound") {
  auto net = manual_network({10.0}, {});
  CHECK_THROWS_AS(step(net, 0.0), StabilityError);
  CHECK_THROWS_AS(step(net, 0.01), StabilityError);
  CHECK_NOTHROW(step(net, 0.0099));
}

TEST_CASE("phases stay wrapped and energies non-negative") {
  auto net = build_network(testfx::ladder_chain(4), NetworkParams{.initial_energy = 0.5, .seed = 9});
  const double dt = 0.05 / net.max_frequency();
  inject_energy(net, 2, 3.0);
  for (int k = 0; k < 500; ++k) step(net, dt);
  for (const auto& s : net.states) {
    CHECK(s.phase >= 0.0);
    CHECK(s.phase < 2 * std::numbers::pi);
    CHECK(s.energy >= 0.0);
  }
}

TEST_CASE("dissipation strictly decreases total energy") {
  NetworkParams p;
  p.dissipation = 1e4;
  p.initial_energy = 1.0;
  auto net = build_network(testfx::ladder_chain(3), p);
  const double dt = 0.05 / net.max_frequency();
  double prev = net.total_energy();
  for (int k = 0; k < 200; ++k) {
    step(net, dt);
    const double e = net.total_energy();
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("energy is conserved without dissipation") {
  NetworkParams p;
  p.initial_energy = 0.25;
  auto net = build_network(testfx::ladder_chain(3, 3), p);
  inject_energy(net, 1, 2.0);
  const double e0 = net.total_energy();
  const double dt = 0.05 / net.max_frequency();
  for (int k = 0; k < 100000; ++k) step(net, dt);
  CHECK(std::abs(net.total_energy() - e0) / e0 <= 1e-9);
}

TEST_CASE("energy injected mid-ladder reaches every layer and equalizes") {
  auto net = build_network(testfx::ladder_chain(5));
  inject_energy(net, 2, 1.0);
  const double dt = 0.05 / net.max_frequency();
  for (int k = 0; k < 20000; ++k) step(net, dt);
  const auto e = layer_energies(net);
  for (double v : e) CHECK(v > 0.0);
  CHECK(std::abs(net.total_energy() - 1.0) <= 1e-9);
  const auto m = layer_mean_energies(net);
  const double mean = net.total_energy() / static_cast<double>(net.size());
  for (double v : m) CHECK(std::abs(v - mean) / mean <= 0.05);
}

TEST_CASE("relay runs in both directions") {
  for (int source : {0, 4}) {
    auto net = build_network(testfx::ladder_chain(5));
    inject_energy(net, source, 1.0);
    const double dt = 0.05 / net.max_frequency();
    for (int k = 0; k < 3000; ++k) step(net, dt);
    for (double v : layer_energies(net)) CHECK(v > 1e-6);
  }
}

TEST_CASE("parallel stepping is bit-identical to one worker") {
  NetworkParams p;
  p.initial_energy = 0.1;
  p.seed = 42;
  auto a = build_network(load_brain_model({8, 16}), p);
  p.workers = 4;
  auto b = build_network(load_brain_model({8, 16}), p);
  inject_energy(a, 5, 1.0);
  inject_energy(b, 5, 1.0);
  const double dt = 0.05 / a.max_frequency();
  for (int k = 0; k < 50; ++k) {
    step(a, dt);
    step(b, dt);
  }
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i)
    same = same && a.states[i].phase == b.states[i].phase && a.states[i].energy == b.states[i].energy;
  CHECK(same);
}

TEST_CASE("same seed gives the same initial phases") {
  const auto chain = testfx::ladder_chain(3);
  auto a = build_network(chain, NetworkParams{.seed = 7});
  auto b = build_network(chain, NetworkParams{.seed = 7});
  auto c = build_network(chain, NetworkParams{.seed = 8});
  bool same = true, differ = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a.states[i].phase == b.states[i].phase;
    differ = differ || a.states[i].phase != c.states[i].phase;
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("coupling rules") {
  SUBCASE("zero window couples exact-frequency pairs only") {
    NetworkParams p;
    p.coupling_window = 0.0;
    p.couple_cross_layer = false;
    p.kappa_intra = 0.0;
    const auto chain = testfx::two_layer_chain(4);
    auto net = build_network(chain, p);
    CHECK(net.coupling.nonzero() > 0);
    for (const auto& c : net.coupling.entries())
      CHECK(net.states[static_cast<std::size_t>(c.i)].natural_frequency ==
            net.states[static_cast<std::size_t>(c.j)].natural_frequency);
  }
  SUBCASE("single peak chain has no couplings") {
    LayerBand layer;
    layer.triplets.resize(1);
    layer.triplets[0].sub = {SubBand{1e3, 2e3, SubBandRole::couples_lower, {ResonancePeak{1.5e3}}},
                             SubBand{3e3, 4e3, SubBandRole::self, {}},
                             SubBand{5e3, 6e3, SubBandRole::couples_upper, {}}};
    auto net = build_network(ResonanceChain({layer}, 8), 0.1, 0.0);
    CHECK(net.size() == 1);
    CHECK(net.coupling.nonzero() == 0);
  }
  SUBCASE("matrix is symmetric with zero diagonal") {
    auto net = build_network(testfx::two_layer_chain(4));
    for (int i = 0; i < static_cast<int>(net.size()); ++i) {
      CHECK(net.coupling.at(i, i) == 0.0);
      for (int j = 0; j < static_cast<int>(net.size()); ++j) CHECK(net.coupling.at(i, j) == net.coupling.at(j, i));
    }
  }
  SUBCASE("window rule in isolation") {
    NetworkParams p;
    p.coupling_window = 0.05;
    p.couple_cross_layer = false;
    p.kappa_intra = 0.0;
    auto net = build_network(testfx::two_layer_chain(4), p);
    for (std::size_t i = 0; i < net.size(); ++i)
      for (std::size_t j = i + 1; j < net.size(); ++j) {
        const double fi = net.states[i].natural_frequency, fj = net.states[j].natural_frequency;
        const bool expect = std::abs(fi - fj) / std::min(fi, fj) < 0.05 || fi == fj;
        CHECK((net.coupling.at(static_cast<int>(i), static_cast<int>(j)) > 0.0) == expect);
      }
  }
  SUBCASE("every brain overlap yields a cross-layer coupling") {
    const auto chain = load_brain_model({8, 16});
    NetworkParams p;
    p.kappa_intra = 0.0;
    p.coupling_window = 0.0;
    auto net = build_network(chain, p);
    for (int l = 0; l + 1 < static_cast<int>(chain.layer_count()); ++l) {
      const auto& a = chain.layer(l);
      const auto& b = chain.layer(l + 1);
      for (const auto& ta : a.triplets)
        for (const auto& sa : ta.sub)
          for (const auto& tb : b.triplets)
            for (const auto& sb : tb.sub) {
              if (std::max(sa.lo, sb.lo) > std::min(sa.hi, sb.hi)) continue;
              int count = 0;
              for (const auto& c : net.coupling.entries()) {
                const auto& ra = net.states[static_cast<std::size_t>(c.i)].peak_ref;
                const auto& rb = net.states[static_cast<std::size_t>(c.j)].peak_ref;
                if (ra.layer == l && rb.layer == l + 1 && &chain.subband_of(ra) == &sa && &chain.subband_of(rb) == &sb)
                  ++count;
              }
              CHECK(count >= 1);
            }
    }
  }
}

TEST_CASE("order parameter") {
  auto net = manual_network({1, 1, 1, 1}, {});
  for (auto& s : net.states) s.phase = 1.234;
  CHECK(order_parameter(net) == doctest::Approx(1.0).epsilon(1e-15));
  for (int k = 0; k < 4; ++k) net.states[static_cast<std::size_t>(k)].phase = k * std::numbers::pi / 2;
  CHECK(order_parameter(net) < 1e-15);
  CHECK_THROWS_AS(order_parameter(net, std::span<const int>{}), PreconditionError);
}

TEST_CASE("beats") {
  auto net = manual_network({440.0, 442.0, 500.0, 500.0}, {{0, 1, 1.0}, {2, 3, 1.0}});
  const auto r = detect_beats(net, 1e-3);
  REQUIRE(r.beats.size() == 1);
  CHECK(r.beats[0].i == 0);
  CHECK(r.beats[0].j == 1);
  CHECK(std::abs(r.beats[0].beat_frequency - 2.0) <= 1e-9);
  REQUIRE(r.matched.size() == 1);
  CHECK(r.matched[0] == std::pair{2, 3});
  CHECK_THROWS_AS(detect_beats(net, 0.0), PreconditionError);
}

TEST_CASE("query tone localizes at its nearest peak") {
  std::vector<double> f;
  for (int k = 0; k < 10; ++k) f.push_back(100.0 * std::pow(1.37, k));
  auto net = manual_network(f, {});
  for (int k = 0; k < 10; ++k) {
    for (double off : {-0.004, 0.003}) {
      const double q = f[static_cast<std::size_t>(k)] * (1 + off);
      const auto resp = beat_response(net, q);
      REQUIRE(resp.size() == 10);
      int best = 0;
      int ties = 0;
      for (const auto& b : resp)
        if (b.amplitude > resp[static_cast<std::size_t>(best)].amplitude) best = b.oscillator;
      for (const auto& b : resp) ties += b.amplitude == resp[static_cast<std::size_t>(best)].amplitude;
      CHECK(best == k);
      CHECK(ties == 1);
    }
  }
  CHECK(beat_response(net, f[3]).empty());
}

TEST_CASE("sync time model") {
  ResonancePeak unit{1.0, 1.0, 1.0};
  CHECK(sync_time_estimate(unit, unit, 1.0) == 1.0);
  ResonancePeak a{2e6, 0.7, 80}, b{2.2e6, 0.9, 120};
  const double t = sync_time_estimate(a, b, 0.3);
  CHECK(sync_time_estimate(a, b, 0.6) == doctest::Approx(t / 2).epsilon(1e-14));
  auto bigger = [&](auto mutate) {
    ResonancePeak a2 = a;
    mutate(a2);
    return sync_time_estimate(a2, b, 0.3) < t;
  };
  CHECK(bigger([](ResonancePeak& p) { p.quality_factor *= 1.5; }));
  CHECK(bigger([](ResonancePeak& p) { p.intensity *= 1.5; }));
  CHECK(bigger([](ResonancePeak& p) { p.frequency *= 1.5; }));
  CHECK_THROWS_AS(sync_time_estimate(a, b, 0.0), ZeroCouplingError);
}

TEST_CASE("sync time ranking ignores intensity scale") {
  std::vector<std::pair<ResonancePeak, ResonancePeak>> pairs;
  for (int k = 0; k < 8; ++k)
    pairs.push_back({{1e3 * (k + 1), 0.2 + 0.1 * k, 50.0 + 7 * k}, {1.1e3 * (k + 1), 1.0 - 0.08 * k, 90.0 - 3 * k}});
  auto argmin = [&](double scale) {
    int best = 0;
    double bt = 1e300;
    for (int k = 0; k < 8; ++k) {
      auto [a, b] = pairs[static_cast<std::size_t>(k)];
      a.intensity *= scale;
      b.intensity *= scale;
      const double t = sync_time_estimate(a, b, 1.0);
      if (t < bt) bt = t, best = k;
    }
    return best;
  };
  CHECK(argmin(1.0) == argmin(17.0));
  CHECK(argmin(1.0) == argmin(0.01));
}

TEST_CASE("doubling coupling shortens measured lock time") {
  for (int k = 0; k < 10; ++k) {
    const double kappa = 0.1 * (k + 1);
    auto run = [&](double kp) {
      auto net = manual_network({2.0, 2.0}, {{0, 1, kp}});
      net.states[0].phase = 0.1 * k;
      net.states[1].phase = 0.1 * k + 2.0;
      const std::vector<int> both{0, 1};
      return measure_lock_steps(net, both, 0.005, 0.999, 100000);
    };
    const auto slow = run(kappa), fast = run(2 * kappa);
    REQUIRE(slow.has_value());
    REQUIRE(fast.has_value());
    CHECK(*fast < *slow);
  }
}

TEST_CASE("multi-rate stepping") {
  auto net = build_network(testfx::ladder_chain(3), NetworkParams{.initial_energy = 1.0});
  step_multirate(net, 0.01);
  for (std::size_t l = 0; l < net.layer_count(); ++l) CHECK(net.layer_time[l] == 0.01 * net.layer_period[l]);
  CHECK(std::abs(net.total_energy() - static_cast<double>(net.size())) < 1e-12);
  CHECK_THROWS_AS(step_multirate(net, 1.0), StabilityError);
}

TEST_CASE("trajectory export") {
  auto net = manual_network({1.0, 2.0}, {{0, 1, 0.5}});
  Trajectory t;
  t.record(net);
  step(net, 0.01);
  t.record(net);
  std::ostringstream a, b;
  write_trajectory_csv(a, t);
  write_order_parameter_csv(b, t);
  std::istringstream la(a.str());
  std::string line;
  int rows = 0;
  std::getline(la, line);
  CHECK(line == "time,oscillator_id,phase,energy");
  while (std::getline(la, line)) ++rows;
  CHECK(rows == 4);
  CHECK(b.str().rfind("time,r\n", 0) == 0);
}
