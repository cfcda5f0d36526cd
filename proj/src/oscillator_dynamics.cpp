#include "ajo/oscillator_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

#include "ajo/errors.hpp"
#include "text_util.hpp"

namespace ajo {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_phase(double theta) {
  double w = std::fmod(theta, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

// Runs body(begin, end) over [0, n) split into contiguous blocks. Each block
// writes only its own slots, so the result is independent of worker count.
template <typename Body>
void parallel_blocks(std::size_t n, int workers, Body body) {
  const std::size_t w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2 * w) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t b = 0; b < n; b += chunk) pool.emplace_back([=] { body(b, std::min(n, b + chunk)); });
}

void integrate(OscillatorNetwork& net, std::span<const double> dt_of_layer) {
  const std::size_t n = net.size();
  std::vector<double> phase(n), energy(n);
  const auto& s = net.states;
  parallel_blocks(n, net.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double dt = dt_of_layer[static_cast<std::size_t>(net.layer_of[i])];
      const double ki = net.coupling.weighted_degree(static_cast<int>(i));
      double drive = 0.0;
      double flux = 0.0;
      for (const auto& nb : net.coupling.neighbours(static_cast<int>(i))) {
        const auto& other = s[static_cast<std::size_t>(nb.index)];
        drive += nb.kappa * other.energy * std::sin(other.phase - s[i].phase);
        const double kj = net.coupling.weighted_degree(nb.index);
        flux += nb.kappa / std::max(ki, kj) * (other.energy - s[i].energy);
      }
      phase[i] = wrap_phase(s[i].phase + kTwoPi * s[i].natural_frequency * dt + drive * dt);
      const double relaxed = s[i].energy + net.relaxation * flux;
      energy[i] = std::max(0.0, relaxed) * std::exp(-net.dissipation * dt);
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    net.states[i].phase = phase[i];
    net.states[i].energy = energy[i];
  }
}

}  // namespace

CouplingMatrix::CouplingMatrix(std::size_t n, std::vector<Coupling> entries)
    : entries_(std::move(entries)), adjacency_(n), degree_(n, 0.0) {
  std::sort(entries_.begin(), entries_.end(),
            [](const Coupling& a, const Coupling& b) { return a.i < b.i || (a.i == b.i && a.j < b.j); });
  for (const auto& e : entries_) {
    if (e.i == e.j || e.i < 0 || e.j < 0 || static_cast<std::size_t>(std::max(e.i, e.j)) >= n || e.kappa < 0.0)
      throw PreconditionError("coupling entries must be off-diagonal, in range and non-negative");
    adjacency_[static_cast<std::size_t>(e.i)].push_back({e.j, e.kappa});
    adjacency_[static_cast<std::size_t>(e.j)].push_back({e.i, e.kappa});
    degree_[static_cast<std::size_t>(e.i)] += e.kappa;
    degree_[static_cast<std::size_t>(e.j)] += e.kappa;
  }
  for (auto& adj : adjacency_)
    std::sort(adj.begin(), adj.end(), [](const Neighbour& a, const Neighbour& b) { return a.index < b.index; });
}

double CouplingMatrix::at(int i, int j) const {
  if (i == j) return 0.0;
  const auto& adj = adjacency_.at(static_cast<std::size_t>(i));
  auto it = std::lower_bound(adj.begin(), adj.end(), j, [](const Neighbour& nb, int v) { return nb.index < v; });
  return it != adj.end() && it->index == j ? it->kappa : 0.0;
}

double OscillatorNetwork::max_frequency() const {
  double f = 0.0;
  for (const auto& s : states) f = std::max(f, s.natural_frequency);
  return f;
}

double OscillatorNetwork::total_energy() const {
  double e = 0.0;
  for (const auto& s : states) e += s.energy;
  return e;
}

OscillatorNetwork build_network(const ResonanceChain& chain, const NetworkParams& params) {
  if (!(params.coupling_window >= 0.0)) throw PreconditionError("coupling window must be >= 0");
  if (!(params.dissipation >= 0.0)) throw PreconditionError("dissipation must be >= 0");
  if (!(params.relaxation >= 0.0 && params.relaxation <= 1.0)) throw PreconditionError("relaxation must be in [0, 1]");

  OscillatorNetwork net;
  net.dissipation = params.dissipation;
  net.relaxation = params.relaxation;
  net.workers = params.workers;
  std::mt19937_64 rng(params.seed);
  std::vector<std::vector<int>> by_layer(chain.layer_count());
  for (const auto& ref : chain.peak_refs()) {
    const auto& p = chain.peak(ref);
    OscillatorState st;
    st.peak_ref = ref;
    st.phase = static_cast<double>(rng() >> 11) * 0x1.0p-53 * kTwoPi;
    st.energy = params.initial_energy;
    st.natural_frequency = p.frequency;
    st.intensity = p.intensity;
    st.quality_factor = p.quality_factor;
    by_layer[static_cast<std::size_t>(ref.layer)].push_back(static_cast<int>(net.states.size()));
    net.layer_of.push_back(ref.layer);
    net.states.push_back(st);
  }
  for (const auto& layer : chain.layers()) net.layer_period.push_back(layer.clock_period());
  net.layer_time.assign(chain.layer_count(), 0.0);

  std::map<std::pair<int, int>, double> kappa;
  auto couple = [&](int a, int b, double k) {
    if (a == b || k <= 0.0) return;
    auto key = std::minmax(a, b);
    double& slot = kappa[{key.first, key.second}];
    slot = std::max(slot, k);
  };

  // frequency window
  std::vector<int> order(net.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return net.states[static_cast<std::size_t>(a)].natural_frequency < net.states[static_cast<std::size_t>(b)].natural_frequency;
  });
  for (std::size_t a = 0; a < order.size(); ++a) {
    const double fa = net.states[static_cast<std::size_t>(order[a])].natural_frequency;
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const double fb = net.states[static_cast<std::size_t>(order[b])].natural_frequency;
      const double rel = (fb - fa) / fa;
      if (!(rel < params.coupling_window || rel == 0.0)) break;
      couple(order[a], order[b], params.kappa_window);
    }
  }

  // adjacent-layer sub-band overlaps
  if (params.couple_cross_layer) {
    for (std::size_t l = 0; l + 1 < chain.layer_count(); ++l) {
      for (int a : by_layer[l])
        for (int b : by_layer[l + 1]) {
          const auto& sa = chain.subband_of(net.states[static_cast<std::size_t>(a)].peak_ref);
          const auto& sb = chain.subband_of(net.states[static_cast<std::size_t>(b)].peak_ref);
          if (std::max(sa.lo, sb.lo) <= std::min(sa.hi, sb.hi)) couple(a, b, params.kappa_cross);
        }
    }
  }

  // a layer behaves as one oscillator: its peaks exchange energy internally
  if (params.kappa_intra > 0.0) {
    for (const auto& members : by_layer)
      for (std::size_t x = 0; x < members.size(); ++x)
        for (std::size_t y = x + 1; y < members.size(); ++y) couple(members[x], members[y], params.kappa_intra);
  }

  std::vector<Coupling> entries;
  entries.reserve(kappa.size());
  for (const auto& [key, k] : kappa) entries.push_back({key.first, key.second, k});
  net.coupling = CouplingMatrix(net.size(), std::move(entries));
  return net;
}

OscillatorNetwork build_network(const ResonanceChain& chain, double coupling_window, double dissipation) {
  NetworkParams p;
  p.coupling_window = coupling_window;
  p.dissipation = dissipation;
  return build_network(chain, p);
}

void step(OscillatorNetwork& network, double dt) {
  const double fmax = network.max_frequency();
  if (!(dt > 0.0) || !(dt * fmax < 0.1))
    throw StabilityError("dt must satisfy 0 < dt < 0.1 / f_max (f_max = " + detail::sci(fmax) + " Hz)");
  std::vector<double> dts(std::max<std::size_t>(1, network.layer_count()), dt);
  integrate(network, dts);
  network.time += dt;
  for (auto& t : network.layer_time) t += dt;
}

void step_multirate(OscillatorNetwork& network, double fraction) {
  if (!(fraction > 0.0)) throw StabilityError("multi-rate fraction must be > 0");
  const std::size_t layers = network.layer_count();
  std::vector<double> fmax(layers, 0.0);
  for (std::size_t i = 0; i < network.size(); ++i) {
    auto& f = fmax[static_cast<std::size_t>(network.layer_of[i])];
    f = std::max(f, network.states[i].natural_frequency);
  }
  std::vector<double> dts(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    dts[l] = fraction * network.layer_period[l];
    if (!(dts[l] * fmax[l] < 0.1))
      throw StabilityError("layer " + std::to_string(l) + " local step violates dt < 0.1 / f_max");
  }
  integrate(network, dts);
  double coarsest = 0.0;
  for (std::size_t l = 0; l < layers; ++l) {
    network.layer_time[l] += dts[l];
    coarsest = std::max(coarsest, dts[l]);
  }
  network.time += coarsest;
}

void inject_energy(OscillatorNetwork& network, int layer, double amount) {
  if (!(amount > 0.0)) throw PreconditionError("injected energy must be > 0");
  if (layer < 0 || static_cast<std::size_t>(layer) >= network.layer_count())
    throw PreconditionError("no layer " + std::to_string(layer));
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < network.size(); ++i)
    if (network.layer_of[i] == layer) members.push_back(i);
  if (members.empty()) throw PreconditionError("layer " + std::to_string(layer) + " has no oscillators");
  const double share = amount / static_cast<double>(members.size());
  for (auto i : members) network.states[i].energy += share;
}

double order_parameter(const OscillatorNetwork& network, std::span<const int> subset) {
  if (subset.empty()) throw PreconditionError("order parameter needs a non-empty subset");
  double re = 0.0, im = 0.0;
  for (int i : subset) {
    const double th = network.states.at(static_cast<std::size_t>(i)).phase;
    re += std::cos(th);
    im += std::sin(th);
  }
  const double n = static_cast<double>(subset.size());
  return std::min(1.0, std::hypot(re / n, im / n));
}

double order_parameter(const OscillatorNetwork& network) {
  std::vector<int> all(network.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return order_parameter(network, all);
}

std::vector<double> layer_energies(const OscillatorNetwork& network) {
  std::vector<double> e(network.layer_count(), 0.0);
  for (std::size_t i = 0; i < network.size(); ++i) e[static_cast<std::size_t>(network.layer_of[i])] += network.states[i].energy;
  return e;
}

std::vector<double> layer_mean_energies(const OscillatorNetwork& network) {
  auto e = layer_energies(network);
  std::vector<double> count(e.size(), 0.0);
  for (int l : network.layer_of) count[static_cast<std::size_t>(l)] += 1.0;
  for (std::size_t l = 0; l < e.size(); ++l)
    if (count[l] > 0.0) e[l] /= count[l];
  return e;
}

BeatReport detect_beats(const OscillatorNetwork& network, double match_hz, double beat_window) {
  if (!(match_hz > 0.0)) throw PreconditionError("match tolerance must be > 0");
  BeatReport report;
  for (const auto& c : network.coupling.entries()) {
    if (c.kappa <= 0.0) continue;
    const double fi = network.states[static_cast<std::size_t>(c.i)].natural_frequency;
    const double fj = network.states[static_cast<std::size_t>(c.j)].natural_frequency;
    const double d = std::abs(fi - fj);
    if (d <= match_hz)
      report.matched.emplace_back(c.i, c.j);
    else if (d <= beat_window * std::min(fi, fj))
      report.beats.push_back({c.i, c.j, d});
  }
  return report;
}

double resonant_amplitude(double intensity, double quality_factor, double natural_hz, double drive_hz) {
  const double detune = drive_hz / natural_hz - natural_hz / drive_hz;
  return intensity / std::sqrt(1.0 + quality_factor * quality_factor * detune * detune);
}

std::vector<BeatResponse> beat_response(const OscillatorNetwork& network, double query_hz, double match_relative) {
  if (!(query_hz > 0.0)) throw PreconditionError("query frequency must be > 0");
  for (const auto& s : network.states)
    if (std::abs(s.natural_frequency - query_hz) <= match_relative * std::max(s.natural_frequency, query_hz))
      return {};
  std::vector<BeatResponse> out;
  out.reserve(network.size());
  for (std::size_t i = 0; i < network.size(); ++i) {
    const auto& s = network.states[i];
    out.push_back({static_cast<int>(i), s.peak_ref, std::abs(s.natural_frequency - query_hz),
                   resonant_amplitude(s.intensity, s.quality_factor, s.natural_frequency, query_hz)});
  }
  return out;
}

double sync_time_estimate(const ResonancePeak& a, const ResonancePeak& b, double kappa, double c0) {
  if (!(kappa > 0.0)) throw ZeroCouplingError("synchronization needs kappa > 0");
  const double f_gm = std::sqrt(a.frequency * b.frequency);
  return c0 / (kappa * std::sqrt(a.quality_factor * b.quality_factor) * std::sqrt(a.intensity * b.intensity) * f_gm);
}

std::optional<long> measure_lock_steps(OscillatorNetwork network, std::span<const int> subset, double dt,
                                       double threshold, long max_steps) {
  for (long k = 0; k <= max_steps; ++k) {
    if (order_parameter(network, subset) >= threshold) return k;
    if (k < max_steps) step(network, dt);
  }
  return std::nullopt;
}

void Trajectory::record(const OscillatorNetwork& network) {
  times.push_back(network.time);
  std::vector<double> ph, en;
  ph.reserve(network.size());
  en.reserve(network.size());
  for (const auto& s : network.states) {
    ph.push_back(s.phase);
    en.push_back(s.energy);
  }
  phases.push_back(std::move(ph));
  energies.push_back(std::move(en));
  order.push_back(network.size() ? order_parameter(network) : 0.0);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& t) {
  out << "time,oscillator_id,phase,energy\n";
  for (std::size_t k = 0; k < t.times.size(); ++k)
    for (std::size_t i = 0; i < t.phases[k].size(); ++i)
      out << detail::shortest(t.times[k]) << ',' << i << ',' << detail::shortest(t.phases[k][i]) << ','
          << detail::shortest(t.energies[k][i]) << '\n';
}

void write_order_parameter_csv(std::ostream& out, const Trajectory& t) {
  out << "time,r\n";
  for (std::size_t k = 0; k < t.times.size(); ++k)
    out << detail::shortest(t.times[k]) << ',' << detail::shortest(t.order[k]) << '\n';
}

}  // namespace ajo
