#pragma once

#include <array>
#include <complex>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ajo {

enum class Direction { positive, negative };
enum class SubBandRole { couples_lower, self, couples_upper };

const char* to_string(SubBandRole role);
SubBandRole parse_role(const std::string& token);

struct ResonancePeak {
  double frequency = 0.0;  // Hz
  double intensity = 1.0;
  double quality_factor = 100.0;
  Direction direction = Direction::positive;
  bool fundamental = true;

  bool operator==(const ResonancePeak&) const = default;
};

struct SubBand {
  double lo = 0.0;  // Hz
  double hi = 0.0;  // Hz
  SubBandRole role = SubBandRole::self;
  std::vector<ResonancePeak> peaks;  // ascending frequency

  bool contains(double f) const { return f >= lo && f <= hi; }
  bool operator==(const SubBand&) const = default;
};

struct TripletBand {
  std::array<SubBand, 3> sub;
  bool operator==(const TripletBand&) const = default;
};

struct LayerBand {
  int level = 1;
  std::string name;
  std::vector<TripletBand> triplets;

  std::size_t peak_count() const;
  double median_frequency() const;
  double clock_period() const { return 1.0 / median_frequency(); }
  double min_frequency() const;
  double max_frequency() const;
  bool operator==(const LayerBand&) const = default;
};

// Address of a peak: layer index in the chain (0 = innermost) and the peak's
// position in the layer's triplet/sub-band/peak flattening.
struct PeakRef {
  int layer = 0;
  int peak_id = 0;
  auto operator<=>(const PeakRef&) const = default;
};

struct PeakLocation {
  int triplet = 0;
  int sub = 0;
  int index = 0;
};

// Discrete complex frequency space: x over positive-direction peaks, y over
// negative-direction peaks, value = P(x) * N(y) with P, N the summed complex
// Lorentzian responses of each direction.
struct FrequencyMap {
  std::vector<double> x_axis;
  std::vector<double> y_axis;
  std::vector<std::complex<double>> values;  // row-major [y][x]

  std::complex<double> at(std::size_t ix, std::size_t iy) const {
    return values[iy * x_axis.size() + ix];
  }
  bool operator==(const FrequencyMap&) const = default;
};

struct ChainOptions {
  int peaks_per_subband = 8;
  int map_resolution = 256;
};

// Line-oriented chain description: one sub-band per entry.
struct SubBandSpec {
  int level = 1;
  int triplet = 1;
  SubBandRole role = SubBandRole::self;
  double lo = 0.0;
  double hi = 0.0;
};

struct ChainSpec {
  std::vector<SubBandSpec> bands;
  std::map<int, std::string> names;  // optional level labels
};

class ResonanceChain {
 public:
  // Checks every structural invariant plus the adjacent-layer overlap rule.
  ResonanceChain(std::vector<LayerBand> layers, int map_resolution = 256);

  const std::vector<LayerBand>& layers() const { return layers_; }
  const LayerBand& layer(int index) const { return layers_.at(static_cast<std::size_t>(index)); }
  std::size_t layer_count() const { return layers_.size(); }
  const FrequencyMap& map() const { return *map_; }
  int map_resolution() const { return map_resolution_; }

  const ResonancePeak& peak(PeakRef ref) const;
  PeakLocation locate(PeakRef ref) const;
  const SubBand& subband_of(PeakRef ref) const;
  bool has_peak(PeakRef ref) const;
  std::vector<PeakRef> peak_refs() const;
  std::size_t peak_count() const;

  double min_frequency() const;
  double max_frequency() const;

  bool operator==(const ResonanceChain& other) const { return layers_ == other.layers_; }

 private:
  friend ResonanceChain shift_peaks(const ResonanceChain&, std::span<const std::pair<PeakRef, double>>);
  void index_and_map();

  std::vector<LayerBand> layers_;
  std::vector<std::vector<PeakLocation>> locations_;
  int map_resolution_;
  std::shared_ptr<const FrequencyMap> map_;
};

ResonanceChain build_chain(const ChainSpec& spec, const ChainOptions& options = {});
ResonanceChain load_brain_model(const ChainOptions& options = {});
ChainSpec brain_model_spec();

ChainSpec parse_chain_spec(std::istream& in);
void write_chain_spec(std::ostream& out, const ChainSpec& spec);
ChainSpec spec_of(const ResonanceChain& chain);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double decades() const;
};

struct PairReport {
  int inner = 0;  // layer index k; the pair is (k, k+1)
  std::vector<Interval> shared;
  std::optional<Interval> widest;  // by log width
  bool violation = false;
};

struct ValidationReport {
  std::vector<PairReport> pairs;
  int violations = 0;
};

ValidationReport validate_layers(std::span<const LayerBand> layers);
ValidationReport validate_chain(const ResonanceChain& chain);

std::vector<double> gen_loglog_peaks(double f0, double growth_base, double super_base, int count);

struct Overtones {
  std::vector<double> harmonic;
  std::vector<double> anharmonic;
};

inline constexpr double kInverseGoldenRatio = 0.6180339887498948482;

Overtones gen_overtones(double frequency, int depth, double anharmonic_ratio = kInverseGoldenRatio,
                        std::optional<double> max_frequency = std::nullopt);

struct ChainMetrics {
  double bandwidth_decades = 0.0;
  double frp_density = 0.0;         // min FRPs per 2-decade window
  double dense_span_decades = 0.0;  // longest span where every window holds >= 8 FRPs
  bool conscious = false;
  // raw intelligence pair
  double intelligent_bandwidth = 0.0;
  double intelligent_density = 0.0;
};

inline constexpr double kConsciousDecades = 12.0;
inline constexpr double kConsciousDensity = 8.0;

ChainMetrics chain_metrics(const ResonanceChain& chain);

ResonanceChain shift_peak(const ResonanceChain& chain, PeakRef ref, double new_frequency);
ResonanceChain shift_peaks(const ResonanceChain& chain, std::span<const std::pair<PeakRef, double>> moves);

struct Deviation {
  PeakRef ref;
  double delta = 0.0;  // modified - pristine, Hz
  bool operator==(const Deviation&) const = default;
};

inline constexpr double kDeviationTolerance = 1e-9;

std::vector<Deviation> diff_chains(const ResonanceChain& pristine, const ResonanceChain& modified);
ResonanceChain apply_deviations(const ResonanceChain& pristine, std::span<const Deviation> deviations);

// FNV-1a over the canonical peak-level serialization.
std::uint64_t chain_hash(const ResonanceChain& chain);
std::string hash_hex(std::uint64_t h);

}  // namespace ajo
