#include "ajo/resonance_chain.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "ajo/errors.hpp"
#include "text_util.hpp"

namespace ajo {

const char* to_string(SubBandRole role) {
  switch (role) {
    case SubBandRole::couples_lower: return "couples_lower";
    case SubBandRole::self: return "self";
    case SubBandRole::couples_upper: return "couples_upper";
  }
  return "self";
}

SubBandRole parse_role(const std::string& token) {
  if (token == "couples_lower" || token == "lower") return SubBandRole::couples_lower;
  if (token == "self") return SubBandRole::self;
  if (token == "couples_upper" || token == "upper") return SubBandRole::couples_upper;
  throw PreconditionError("unknown sub-band role '" + token + "'");
}

std::size_t LayerBand::peak_count() const {
  std::size_t n = 0;
  for (const auto& t : triplets)
    for (const auto& s : t.sub) n += s.peaks.size();
  return n;
}

double LayerBand::median_frequency() const {
  std::vector<double> f;
  for (const auto& t : triplets)
    for (const auto& s : t.sub)
      for (const auto& p : s.peaks) f.push_back(p.frequency);
  if (f.empty()) return std::sqrt(min_frequency() * max_frequency());
  std::sort(f.begin(), f.end());
  const std::size_t n = f.size();
  return n % 2 ? f[n / 2] : std::sqrt(f[n / 2 - 1] * f[n / 2]);
}

double LayerBand::min_frequency() const {
  double lo = HUGE_VAL;
  for (const auto& t : triplets)
    for (const auto& s : t.sub) lo = std::min(lo, s.lo);
  return lo;
}

double LayerBand::max_frequency() const {
  double hi = 0.0;
  for (const auto& t : triplets)
    for (const auto& s : t.sub) hi = std::max(hi, s.hi);
  return hi;
}

double Interval::decades() const { return std::log10(hi / lo); }

namespace {

std::string where(const LayerBand& layer, std::size_t t, std::size_t s) {
  return "level " + std::to_string(layer.level) + " triplet " + std::to_string(t + 1) +
         " sub-band " + std::to_string(s + 1);
}

void check_layer(const LayerBand& layer) {
  if (layer.triplets.empty() || layer.triplets.size() > 3)
    throw BandOrderError("level " + std::to_string(layer.level) + " must hold 1..3 triplets");
  for (std::size_t t = 0; t < layer.triplets.size(); ++t) {
    const auto& trip = layer.triplets[t];
    for (std::size_t s = 0; s < 3; ++s) {
      const SubBand& sb = trip.sub[s];
      if (!(sb.lo > 0.0) || !(sb.lo < sb.hi) || !std::isfinite(sb.hi))
        throw BandOrderError(where(layer, t, s) + " needs 0 < lo < hi");
      for (const auto& p : sb.peaks) {
        if (!(p.frequency > 0.0) || !(p.quality_factor > 0.0) || !(p.intensity >= 0.0))
          throw RangeError(where(layer, t, s) + " holds a peak with invalid parameters");
        if (!sb.contains(p.frequency))
          throw OutOfBandError(where(layer, t, s) + " holds a peak outside its range");
      }
      if (s > 0) {
        const SubBand& prev = trip.sub[s - 1];
        if (!(prev.lo < sb.lo) || !(prev.hi < sb.hi) || prev.hi > sb.lo)
          throw BandOrderError(where(layer, t, s) + " is not strictly above its predecessor");
      }
    }
  }
}

bool intersects(const SubBand& a, const SubBand& b) {
  return std::max(a.lo, b.lo) <= std::min(a.hi, b.hi);
}

std::vector<std::complex<double>> response(const std::vector<LayerBand>& layers,
                                           const std::vector<double>& axis, Direction dir) {
  std::vector<std::complex<double>> out(axis.size());
  for (const auto& layer : layers)
    for (const auto& t : layer.triplets)
      for (const auto& s : t.sub)
        for (const auto& p : s.peaks) {
          if (p.direction != dir) continue;
          for (std::size_t i = 0; i < axis.size(); ++i) {
            const double detune = axis[i] / p.frequency - p.frequency / axis[i];
            out[i] += p.intensity / std::complex<double>(1.0, p.quality_factor * detune);
          }
        }
  return out;
}

std::vector<double> log_axis(double lo, double hi, int n) {
  std::vector<double> axis(static_cast<std::size_t>(n));
  if (n == 1) {
    axis[0] = std::sqrt(lo * hi);
    return axis;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) axis[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (n - 1));
  return axis;
}

}  // namespace

ResonanceChain::ResonanceChain(std::vector<LayerBand> layers, int map_resolution)
    : layers_(std::move(layers)), map_resolution_(map_resolution) {
  if (layers_.empty()) throw PreconditionError("a chain needs at least one layer");
  if (map_resolution_ < 1) throw PreconditionError("map resolution must be >= 1");
  for (const auto& layer : layers_) check_layer(layer);
  for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
    if (!(layers_[k].median_frequency() > layers_[k + 1].median_frequency()))
      throw BandOrderError("level " + std::to_string(layers_[k].level) +
                           " is not faster than the next layer");
  }
  const auto report = validate_layers(layers_);
  for (const auto& pair : report.pairs) {
    if (pair.violation)
      throw OverlapError("levels " + std::to_string(layers_[pair.inner].level) + " and " +
                         std::to_string(layers_[pair.inner + 1].level) + " share no frequency range");
  }
  index_and_map();
}

void ResonanceChain::index_and_map() {
  locations_.clear();
  for (const auto& layer : layers_) {
    std::vector<PeakLocation> loc;
    for (std::size_t t = 0; t < layer.triplets.size(); ++t)
      for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t i = 0; i < layer.triplets[t].sub[s].peaks.size(); ++i)
          loc.push_back({static_cast<int>(t), static_cast<int>(s), static_cast<int>(i)});
    locations_.push_back(std::move(loc));
  }
  auto map = std::make_shared<FrequencyMap>();
  map->x_axis = log_axis(min_frequency(), max_frequency(), map_resolution_);
  map->y_axis = map->x_axis;
  const auto pos = response(layers_, map->x_axis, Direction::positive);
  const auto neg = response(layers_, map->y_axis, Direction::negative);
  map->values.resize(pos.size() * neg.size());
  for (std::size_t iy = 0; iy < neg.size(); ++iy)
    for (std::size_t ix = 0; ix < pos.size(); ++ix) map->values[iy * pos.size() + ix] = pos[ix] * neg[iy];
  map_ = std::move(map);
}

bool ResonanceChain::has_peak(PeakRef ref) const {
  return ref.layer >= 0 && static_cast<std::size_t>(ref.layer) < locations_.size() && ref.peak_id >= 0 &&
         static_cast<std::size_t>(ref.peak_id) < locations_[static_cast<std::size_t>(ref.layer)].size();
}

PeakLocation ResonanceChain::locate(PeakRef ref) const {
  if (!has_peak(ref))
    throw PreconditionError("no peak " + std::to_string(ref.peak_id) + " in layer " + std::to_string(ref.layer));
  return locations_[static_cast<std::size_t>(ref.layer)][static_cast<std::size_t>(ref.peak_id)];
}

const SubBand& ResonanceChain::subband_of(PeakRef ref) const {
  const auto loc = locate(ref);
  return layers_[static_cast<std::size_t>(ref.layer)].triplets[static_cast<std::size_t>(loc.triplet)]
      .sub[static_cast<std::size_t>(loc.sub)];
}

const ResonancePeak& ResonanceChain::peak(PeakRef ref) const {
  const auto loc = locate(ref);
  return subband_of(ref).peaks[static_cast<std::size_t>(loc.index)];
}

std::vector<PeakRef> ResonanceChain::peak_refs() const {
  std::vector<PeakRef> refs;
  for (std::size_t l = 0; l < locations_.size(); ++l)
    for (std::size_t i = 0; i < locations_[l].size(); ++i)
      refs.push_back({static_cast<int>(l), static_cast<int>(i)});
  return refs;
}

std::size_t ResonanceChain::peak_count() const {
  std::size_t n = 0;
  for (const auto& l : locations_) n += l.size();
  return n;
}

double ResonanceChain::min_frequency() const {
  double lo = HUGE_VAL;
  for (const auto& l : layers_) lo = std::min(lo, l.min_frequency());
  return lo;
}

double ResonanceChain::max_frequency() const {
  double hi = 0.0;
  for (const auto& l : layers_) hi = std::max(hi, l.max_frequency());
  return hi;
}

ResonanceChain build_chain(const ChainSpec& spec, const ChainOptions& options) {
  if (spec.bands.empty()) throw PreconditionError("chain spec lists no sub-bands");
  if (options.peaks_per_subband < 0) throw PreconditionError("peaks_per_subband must be >= 0");
  // level -> triplet -> sub-bands, in file order
  std::map<int, std::map<int, std::vector<SubBandSpec>>> grouped;
  for (const auto& b : spec.bands) grouped[b.level][b.triplet].push_back(b);

  std::vector<LayerBand> layers;
  for (const auto& [level, triplets] : grouped) {
    LayerBand layer;
    layer.level = level;
    auto name = spec.names.find(level);
    layer.name = name != spec.names.end() ? name->second : "L" + std::to_string(level);
    for (const auto& [tidx, bands] : triplets) {
      if (bands.size() != 3)
        throw BandOrderError("level " + std::to_string(level) + " triplet " + std::to_string(tidx) +
                             " lists " + std::to_string(bands.size()) + " sub-bands, expected 3");
      TripletBand trip;
      for (std::size_t s = 0; s < 3; ++s) {
        if (static_cast<int>(bands[s].role) != static_cast<int>(s))
          throw BandOrderError("level " + std::to_string(level) + " triplet " + std::to_string(tidx) +
                               " sub-bands must be listed lower, self, upper");
        SubBand sb;
        sb.lo = bands[s].lo;
        sb.hi = bands[s].hi;
        sb.role = bands[s].role;
        if (sb.lo > 0.0 && sb.lo < sb.hi) {
          const int n = options.peaks_per_subband;
          for (int k = 0; k < n; ++k) {
            ResonancePeak p;
            p.frequency = sb.lo * std::pow(sb.hi / sb.lo, (k + 0.5) / n);
            p.direction = k % 2 == 0 ? Direction::positive : Direction::negative;
            p.fundamental = true;
            sb.peaks.push_back(p);
          }
        }
        trip.sub[s] = std::move(sb);
      }
      layer.triplets.push_back(std::move(trip));
    }
    layers.push_back(std::move(layer));
  }
  return ResonanceChain(std::move(layers), options.map_resolution);
}

ChainSpec parse_chain_spec(std::istream& in) {
  ChainSpec spec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    const std::string body = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto tok = detail::split_ws(body);
    if (tok.size() == 3 && tok[0] == "name") {
      auto level = detail::parse_int(tok[1]);
      if (!level) throw ParseError(lineno, "bad level in name directive");
      spec.names[static_cast<int>(*level)] = tok[2];
      continue;
    }
    if (tok.size() != 5) throw ParseError(lineno, "expected 'level triplet role lo_hz hi_hz'");
    auto level = detail::parse_int(tok[0]);
    auto triplet = detail::parse_int(tok[1]);
    auto lo = detail::parse_double(tok[3]);
    auto hi = detail::parse_double(tok[4]);
    if (!level || !triplet || !lo || !hi) throw ParseError(lineno, "malformed number");
    SubBandSpec b;
    b.level = static_cast<int>(*level);
    b.triplet = static_cast<int>(*triplet);
    try {
      b.role = parse_role(tok[2]);
    } catch (const PreconditionError&) {
      throw ParseError(lineno, "unknown role '" + tok[2] + "'");
    }
    b.lo = *lo;
    b.hi = *hi;
    spec.bands.push_back(b);
  }
  return spec;
}

void write_chain_spec(std::ostream& out, const ChainSpec& spec) {
  out << "# level triplet role lo_hz hi_hz\n";
  for (const auto& [level, name] : spec.names) out << "name " << level << ' ' << name << '\n';
  for (const auto& b : spec.bands)
    out << b.level << ' ' << b.triplet << ' ' << to_string(b.role) << ' ' << detail::sci(b.lo) << ' '
        << detail::sci(b.hi) << '\n';
}

ChainSpec spec_of(const ResonanceChain& chain) {
  ChainSpec spec;
  for (const auto& layer : chain.layers()) {
    spec.names[layer.level] = layer.name;
    for (std::size_t t = 0; t < layer.triplets.size(); ++t)
      for (const auto& sb : layer.triplets[t].sub)
        spec.bands.push_back({layer.level, static_cast<int>(t) + 1, sb.role, sb.lo, sb.hi});
  }
  return spec;
}

ValidationReport validate_layers(std::span<const LayerBand> layers) {
  ValidationReport report;
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    PairReport pair;
    pair.inner = static_cast<int>(k);
    for (const auto& ta : layers[k].triplets)
      for (const auto& a : ta.sub)
        for (const auto& tb : layers[k + 1].triplets)
          for (const auto& b : tb.sub)
            if (intersects(a, b)) pair.shared.push_back({std::max(a.lo, b.lo), std::min(a.hi, b.hi)});
    std::sort(pair.shared.begin(), pair.shared.end(),
              [](const Interval& x, const Interval& y) { return x.lo < y.lo || (x.lo == y.lo && x.hi < y.hi); });
    for (const auto& iv : pair.shared)
      if (!pair.widest || iv.decades() > pair.widest->decades()) pair.widest = iv;
    pair.violation = pair.shared.empty();
    report.violations += pair.violation ? 1 : 0;
    report.pairs.push_back(std::move(pair));
  }
  return report;
}

ValidationReport validate_chain(const ResonanceChain& chain) { return validate_layers(chain.layers()); }

std::vector<double> gen_loglog_peaks(double f0, double growth_base, double super_base, int count) {
  constexpr double kMinSuper = 1.0 + 1e-9;
  if (!(f0 > 0.0) || !(growth_base > 1.0) || !(super_base > kMinSuper) || count < 1)
    throw PreconditionError("gen_loglog_peaks needs f0 > 0, b > 1, c > 1 + 1e-9, n >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double f = f0 * std::pow(growth_base, std::pow(super_base, k));
    if (!std::isfinite(f)) throw RangeError("log-in-log peak " + std::to_string(k) + " overflows");
    out.push_back(f);
  }
  return out;
}

Overtones gen_overtones(double frequency, int depth, double anharmonic_ratio, std::optional<double> max_frequency) {
  if (depth < 1) throw PreconditionError("overtone depth must be >= 1");
  if (!(frequency > 0.0)) throw PreconditionError("overtone base frequency must be > 0");
  Overtones out;
  for (int m = 2; m <= depth + 1; ++m) {
    const double f = frequency * m;
    if (!max_frequency || f <= *max_frequency) out.harmonic.push_back(f);
  }
  for (int k = 1; k <= depth; ++k) {
    const double f = frequency * (1.0 + k * anharmonic_ratio);
    if (!max_frequency || f <= *max_frequency) out.anharmonic.push_back(f);
  }
  return out;
}

ChainMetrics chain_metrics(const ResonanceChain& chain) {
  constexpr double kWindow = 2.0;  // decades
  ChainMetrics m;
  std::vector<double> p;
  for (const auto& layer : chain.layers())
    for (const auto& t : layer.triplets)
      for (const auto& s : t.sub)
        for (const auto& peak : s.peaks)
          if (peak.fundamental) p.push_back(std::log10(peak.frequency));
  std::sort(p.begin(), p.end());
  const double lo = std::log10(chain.min_frequency());
  const double hi = std::log10(chain.max_frequency());
  m.bandwidth_decades = hi - lo;
  auto count_in = [&](double x) {
    auto a = std::lower_bound(p.begin(), p.end(), x);
    auto b = std::upper_bound(p.begin(), p.end(), x + kWindow);
    return static_cast<double>(b - a);
  };

  if (m.bandwidth_decades <= kWindow) {
    m.frp_density = static_cast<double>(p.size());
    m.dense_span_decades = m.frp_density >= kConsciousDensity ? m.bandwidth_decades : 0.0;
  } else {
    // Window counts are piecewise constant between breakpoints; the minimum is
    // attained on an open interval, so evaluating interval midpoints suffices.
    const double last = hi - kWindow;
    std::vector<double> br{lo, last};
    for (double v : p) {
      if (v >= lo && v <= last) br.push_back(v);
      if (v - kWindow >= lo && v - kWindow <= last) br.push_back(v - kWindow);
    }
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    m.frp_density = HUGE_VAL;
    double run_start = 0.0;
    bool in_run = false;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      const double c = count_in(0.5 * (br[k] + br[k + 1]));
      m.frp_density = std::min(m.frp_density, c);
      if (c >= kConsciousDensity) {
        if (!in_run) run_start = br[k];
        in_run = true;
        m.dense_span_decades = std::max(m.dense_span_decades, br[k + 1] + kWindow - run_start);
      } else {
        in_run = false;
      }
    }
    if (br.size() == 1) {
      m.frp_density = count_in(br[0]);
      m.dense_span_decades = m.frp_density >= kConsciousDensity ? m.bandwidth_decades : 0.0;
    }
  }
  m.conscious = m.dense_span_decades >= kConsciousDecades;
  m.intelligent_bandwidth = m.bandwidth_decades;
  m.intelligent_density = m.frp_density;
  return m;
}

ResonanceChain shift_peaks(const ResonanceChain& chain, std::span<const std::pair<PeakRef, double>> moves) {
  ResonanceChain out = chain;
  for (const auto& [ref, f] : moves) {
    const auto loc = out.locate(ref);
    SubBand& sb = out.layers_[static_cast<std::size_t>(ref.layer)]
                      .triplets[static_cast<std::size_t>(loc.triplet)]
                      .sub[static_cast<std::size_t>(loc.sub)];
    if (!sb.contains(f))
      throw OutOfBandError("frequency " + detail::sci(f) + " Hz is outside sub-band [" + detail::sci(sb.lo) +
                           ", " + detail::sci(sb.hi) + "]");
    sb.peaks[static_cast<std::size_t>(loc.index)].frequency = f;
  }
  out.index_and_map();
  return out;
}

ResonanceChain shift_peak(const ResonanceChain& chain, PeakRef ref, double new_frequency) {
  const std::pair<PeakRef, double> move{ref, new_frequency};
  return shift_peaks(chain, std::span(&move, 1));
}

namespace {

void check_schema(const ResonanceChain& a, const ResonanceChain& b) {
  if (a.layer_count() != b.layer_count()) throw SchemaError("chains differ in layer count");
  for (std::size_t l = 0; l < a.layer_count(); ++l)
    if (a.layers()[l].peak_count() != b.layers()[l].peak_count())
      throw SchemaError("chains differ in peak count at layer " + std::to_string(l));
}

}  // namespace

std::vector<Deviation> diff_chains(const ResonanceChain& pristine, const ResonanceChain& modified) {
  check_schema(pristine, modified);
  std::vector<Deviation> out;
  for (const auto& ref : pristine.peak_refs()) {
    const double a = pristine.peak(ref).frequency;
    const double b = modified.peak(ref).frequency;
    if (std::abs(b - a) > kDeviationTolerance * std::max(std::abs(a), std::abs(b))) out.push_back({ref, b - a});
  }
  return out;
}

ResonanceChain apply_deviations(const ResonanceChain& pristine, std::span<const Deviation> deviations) {
  std::vector<std::pair<PeakRef, double>> moves;
  for (const auto& d : deviations) moves.emplace_back(d.ref, pristine.peak(d.ref).frequency + d.delta);
  return shift_peaks(pristine, moves);
}

std::uint64_t chain_hash(const ResonanceChain& chain) {
  std::ostringstream os;
  for (const auto& layer : chain.layers()) {
    os << "L " << layer.level << ' ' << layer.name << '\n';
    for (const auto& t : layer.triplets)
      for (const auto& s : t.sub) {
        os << "S " << detail::sci(s.lo) << ' ' << detail::sci(s.hi) << ' ' << to_string(s.role) << '\n';
        for (const auto& p : s.peaks)
          os << "P " << detail::sci(p.frequency) << ' ' << detail::sci(p.intensity) << ' '
             << detail::sci(p.quality_factor) << ' ' << (p.direction == Direction::positive ? '+' : '-') << ' '
             << p.fundamental << '\n';
      }
  }
  return detail::fnv1a(os.str());
}

std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return s;
}

}  // namespace ajo
