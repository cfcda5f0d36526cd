#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ajo/resonance_chain.hpp"

namespace ajo {

struct OscillatorState {
  PeakRef peak_ref;
  double phase = 0.0;   // radians, [0, 2pi)
  double energy = 0.0;  // >= 0
  double natural_frequency = 0.0;
  double intensity = 1.0;
  double quality_factor = 100.0;
};

struct Coupling {
  int i = 0;
  int j = 0;  // i < j
  double kappa = 0.0;
};

// Symmetric sparse coupling with zero diagonal. Entries are stored once with
// i < j; neighbours() exposes both directions in ascending index order.
class CouplingMatrix {
 public:
  CouplingMatrix() = default;
  CouplingMatrix(std::size_t n, std::vector<Coupling> entries);

  std::size_t size() const { return adjacency_.size(); }
  const std::vector<Coupling>& entries() const { return entries_; }
  std::size_t nonzero() const { return entries_.size(); }
  double at(int i, int j) const;
  double weighted_degree(int i) const { return degree_[static_cast<std::size_t>(i)]; }

  struct Neighbour {
    int index;
    double kappa;
  };
  const std::vector<Neighbour>& neighbours(int i) const { return adjacency_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<Coupling> entries_;
  std::vector<std::vector<Neighbour>> adjacency_;
  std::vector<double> degree_;
};

struct NetworkParams {
  double coupling_window = 0.1;  // relative frequency window w
  double dissipation = 0.0;      // gamma, 1/s
  double kappa_window = 1.0;
  double kappa_cross = 1.0;      // adjacent-layer sub-band overlap
  double kappa_intra = 1.0;      // same-layer peaks; 0 disables
  bool couple_cross_layer = true;
  double relaxation = 0.1;       // lambda per step
  double initial_energy = 0.0;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct OscillatorNetwork {
  std::vector<OscillatorState> states;
  CouplingMatrix coupling;
  std::vector<int> layer_of;          // layer index per oscillator
  std::vector<double> layer_time;     // local clocks (multi-rate stepping)
  std::vector<double> layer_period;   // clock period per layer
  double time = 0.0;
  double dissipation = 0.0;
  double relaxation = 0.1;
  int workers = 1;

  std::size_t size() const { return states.size(); }
  std::size_t layer_count() const { return layer_period.size(); }
  double max_frequency() const;
  double total_energy() const;
};

OscillatorNetwork build_network(const ResonanceChain& chain, const NetworkParams& params = {});
OscillatorNetwork build_network(const ResonanceChain& chain, double coupling_window, double dissipation);

// Stability bound: dt < 0.1 / f_max.
void step(OscillatorNetwork& network, double dt);
// Each layer advances one local step of fraction * clock_period; energy
// exchange happens once per call.
void step_multirate(OscillatorNetwork& network, double fraction);

void inject_energy(OscillatorNetwork& network, int layer, double amount);

double order_parameter(const OscillatorNetwork& network, std::span<const int> subset);
double order_parameter(const OscillatorNetwork& network);

std::vector<double> layer_energies(const OscillatorNetwork& network);
std::vector<double> layer_mean_energies(const OscillatorNetwork& network);

struct Beat {
  int i = 0;
  int j = 0;
  double beat_frequency = 0.0;
  bool operator==(const Beat&) const = default;
};

struct BeatReport {
  std::vector<Beat> beats;
  std::vector<std::pair<int, int>> matched;
};

inline constexpr double kBeatWindow = 0.1;
inline constexpr double kMatchRelative = 1e-6;

BeatReport detect_beats(const OscillatorNetwork& network, double match_hz, double beat_window = kBeatWindow);

// Driven response of every oscillator to an injected query tone. A query
// within match_relative of any stored peak is rejected (empty result).
struct BeatResponse {
  int oscillator = 0;
  PeakRef peak;
  double beat_frequency = 0.0;
  double amplitude = 0.0;
};

std::vector<BeatResponse> beat_response(const OscillatorNetwork& network, double query_hz,
                                        double match_relative = kMatchRelative);

double resonant_amplitude(double intensity, double quality_factor, double natural_hz, double drive_hz);

double sync_time_estimate(const ResonancePeak& a, const ResonancePeak& b, double kappa, double c0 = 1.0);

// Steps until order_parameter(subset) >= threshold; nullopt if max_steps reached.
std::optional<long> measure_lock_steps(OscillatorNetwork network, std::span<const int> subset, double dt,
                                       double threshold, long max_steps);

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> phases;
  std::vector<std::vector<double>> energies;
  std::vector<double> order;

  void record(const OscillatorNetwork& network);
};

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);
void write_order_parameter_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace ajo
