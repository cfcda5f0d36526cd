#include "ajo/store.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ajo/errors.hpp"
#include "text_util.hpp"

namespace ajo {

namespace {

double as_double(const std::string& key, const std::string& v) {
  const auto d = detail::parse_double(v);
  if (!d) throw ConfigError(key + " expects a number, got '" + v + "'");
  return *d;
}

long long as_int(const std::string& key, const std::string& v) {
  const auto i = detail::parse_int(v);
  if (!i) throw ConfigError(key + " expects an integer, got '" + v + "'");
  return *i;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + " expects true or false, got '" + v + "'");
}

std::uint64_t as_seed(const std::string& key, const std::string& v) {
  const auto i = detail::parse_int(v);
  if (!i || *i < 0) throw ConfigError(key + " expects a non-negative integer, got '" + v + "'");
  return static_cast<std::uint64_t>(*i);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

// Re-raises a parse error from an embedded section at its line in the whole file.
[[noreturn]] void rethrow_at(const ParseError& e, int offset) {
  std::string msg = e.what();
  const auto colon = msg.find(": line ");
  if (colon != std::string::npos) {
    const auto rest = msg.find(": ", colon + 7);
    if (rest != std::string::npos) msg = msg.substr(rest + 2);
  }
  throw ParseError(e.line() + offset, msg);
}

}  // namespace

ColumnParams ExperimentConfig::column_params() const {
  ColumnParams p;
  p.tau0 = tau0;
  p.max_level = max_level;
  p.write_shift = write_shift;
  return p;
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& v) {
  if (key == "chain") c.chain = v;
  else if (key == "peaks_per_subband") c.peaks_per_subband = static_cast<int>(as_int(key, v));
  else if (key == "map_resolution") c.map_resolution = static_cast<int>(as_int(key, v));
  else if (key == "dt") c.dt = as_double(key, v);
  else if (key == "fraction") c.fraction = as_double(key, v);
  else if (key == "steps") c.steps = static_cast<long>(as_int(key, v));
  else if (key == "gamma") c.gamma = as_double(key, v);
  else if (key == "window") c.window = as_double(key, v);
  else if (key == "kappa_intra") c.kappa_intra = as_double(key, v);
  else if (key == "relaxation") c.relaxation = as_double(key, v);
  else if (key == "inject_layer") c.inject_layer = static_cast<int>(as_int(key, v));
  else if (key == "inject_energy") c.inject_energy = as_double(key, v);
  else if (key == "seed") c.seed = as_seed(key, v);
  else if (key == "accept_score") c.accept_score = as_double(key, v);
  else if (key == "denoise") c.denoise = as_bool(key, v);
  else if (key == "extrapolate") c.extrapolate = as_bool(key, v);
  else if (key == "mode") {
    try {
      c.mode = parse_write_mode(v);
    } catch (const PreconditionError&) {
      throw ConfigError("mode expects single-peak or paired, got '" + v + "'");
    }
  } else if (key == "tau0") c.tau0 = as_double(key, v);
  else if (key == "max_level") c.max_level = static_cast<int>(as_int(key, v));
  else if (key == "write_shift") c.write_shift = as_double(key, v);
  else if (key == "max_cycles") c.max_cycles = static_cast<int>(as_int(key, v));
  else if (key == "epsilon_converge") c.epsilon_converge = as_double(key, v);
  else if (key == "output_dir") c.output_dir = v;
  else throw ConfigError("unknown config key '" + key + "'");
}

void validate_config(const ExperimentConfig& c) {
  require(!c.chain.empty(), "chain must name brain-model or a spec file");
  require(c.peaks_per_subband >= 1 && c.peaks_per_subband <= 64, "peaks_per_subband must lie in [1, 64]");
  require(c.map_resolution >= 2 && c.map_resolution <= 4096, "map_resolution must lie in [2, 4096]");
  require(c.dt >= 0.0, "dt must be >= 0");
  require(c.fraction >= 0.0 && c.fraction <= 0.1, "fraction must lie in [0, 0.1]");
  require(c.steps >= 0, "steps must be >= 0");
  require(c.gamma >= 0.0, "gamma must be >= 0");
  require(c.window > 0.0 && c.window < 1.0, "window must lie in (0, 1)");
  require(c.kappa_intra >= 0.0, "kappa_intra must be >= 0");
  require(c.relaxation >= 0.0 && c.relaxation <= 1.0, "relaxation must lie in [0, 1]");
  require(c.inject_layer >= 0, "inject_layer must be >= 0");
  require(c.inject_energy >= 0.0, "inject_energy must be >= 0");
  require(c.accept_score >= 0.0 && c.accept_score <= 1.0, "accept_score must lie in [0, 1]");
  require(c.tau0 > 0.0, "tau0 must be > 0");
  require(c.max_level >= 1 && c.max_level <= 64, "max_level must lie in [1, 64]");
  require(c.write_shift > 0.0 && c.write_shift < 0.1, "write_shift must lie in (0, 0.1)");
  require(c.max_cycles >= 1 && c.max_cycles <= 1000, "max_cycles must lie in [1, 1000]");
  require(c.epsilon_converge >= 0.0 && c.epsilon_converge <= 1.0, "epsilon_converge must lie in [0, 1]");
  require(!c.output_dir.empty(), "output_dir must not be empty");
}

ExperimentConfig parse_experiment_config(std::istream& in, ExperimentConfig base) {
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto text = detail::trim(raw.substr(0, raw.find('#')));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key=value");
    try {
      set_config_value(base, detail::trim(text.substr(0, eq)), detail::trim(text.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line) + ": " + std::string(e.what()).substr(13));
    }
  }
  validate_config(base);
  return base;
}

ExperimentConfig load_experiment_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  return parse_experiment_config(in, std::move(base));
}

void apply_environment(ExperimentConfig& config) {
  if (const char* s = std::getenv("AJO_SEED"); s && *s) config.seed = as_seed("AJO_SEED", s);
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
  using detail::shortest;
  out << "chain=" << c.chain << "\n"
      << "peaks_per_subband=" << c.peaks_per_subband << "\n"
      << "map_resolution=" << c.map_resolution << "\n"
      << "dt=" << shortest(c.dt) << "\n"
      << "fraction=" << shortest(c.fraction) << "\n"
      << "steps=" << c.steps << "\n"
      << "gamma=" << shortest(c.gamma) << "\n"
      << "window=" << shortest(c.window) << "\n"
      << "kappa_intra=" << shortest(c.kappa_intra) << "\n"
      << "relaxation=" << shortest(c.relaxation) << "\n"
      << "inject_layer=" << c.inject_layer << "\n"
      << "inject_energy=" << shortest(c.inject_energy) << "\n"
      << "seed=" << c.seed << "\n"
      << "accept_score=" << shortest(c.accept_score) << "\n"
      << "denoise=" << (c.denoise ? "true" : "false") << "\n"
      << "extrapolate=" << (c.extrapolate ? "true" : "false") << "\n"
      << "mode=" << to_string(c.mode) << "\n"
      << "tau0=" << shortest(c.tau0) << "\n"
      << "max_level=" << c.max_level << "\n"
      << "write_shift=" << shortest(c.write_shift) << "\n"
      << "max_cycles=" << c.max_cycles << "\n"
      << "epsilon_converge=" << shortest(c.epsilon_converge) << "\n"
      << "output_dir=" << c.output_dir << "\n";
}

ResonanceChain load_chain(const ExperimentConfig& config) {
  if (config.chain == "brain-model") return load_brain_model(config.chain_options());
  std::ifstream in(config.chain);
  if (!in) throw IoError("cannot read chain spec " + config.chain);
  return build_chain(parse_chain_spec(in), config.chain_options());
}

// ---------------------------------------------------------------- state

void write_state(std::ostream& out, const ChainOptions& options, const ArgumentColumn& column) {
  const auto& pristine = column.pristine();
  const auto spec = spec_of(pristine);
  const auto built = build_chain(spec, options);
  const auto& p = column.params();
  out << "ajo-state " << kStateFormatVersion << "\n";
  out << "options " << options.peaks_per_subband << ' ' << options.map_resolution << "\n";
  out << "params " << detail::shortest(p.tau0) << ' ' << p.max_level << ' ' << detail::shortest(p.overtone_tolerance)
      << ' ' << detail::shortest(p.write_shift) << "\n";
  std::ostringstream spec_text;
  write_chain_spec(spec_text, spec);
  const auto text = spec_text.str();
  out << "spec " << std::count(text.begin(), text.end(), '\n') << "\n" << text;
  std::vector<PeakRef> tuned;
  for (const auto& r : pristine.peak_refs())
    if (!built.has_peak(r) || built.peak(r).frequency != pristine.peak(r).frequency) tuned.push_back(r);
  out << "peaks " << tuned.size() << "\n";
  for (const auto& r : tuned)
    out << "peak " << r.layer << ':' << r.peak_id << ' ' << detail::sci(pristine.peak(r).frequency) << "\n";
  write_column(out, column);
}

State read_state(std::istream& in) {
  std::string line;
  int lineno = 0;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw ParseError(lineno + 1, std::string("unexpected end of file, expected ") + what);
    ++lineno;
    return detail::split_ws(line);
  };
  auto count_of = [&](const std::vector<std::string>& tok, const char* key) {
    const auto n = tok.size() == 2 && tok[0] == key ? detail::parse_int(tok[1]) : std::nullopt;
    if (!n || *n < 0) throw ParseError(lineno, std::string("expected '") + key + " <count>'");
    return static_cast<int>(*n);
  };

  auto tok = next("header");
  if (tok.size() != 2 || tok[0] != "ajo-state") throw ParseError(lineno, "not a state file");
  if (tok[1] != std::to_string(kStateFormatVersion)) throw VersionError("unsupported state format version " + tok[1]);

  tok = next("options");
  ChainOptions options;
  {
    const auto a = tok.size() == 3 && tok[0] == "options" ? detail::parse_int(tok[1]) : std::nullopt;
    const auto b = tok.size() == 3 ? detail::parse_int(tok[2]) : std::nullopt;
    if (!a || !b) throw ParseError(lineno, "expected 'options <peaks_per_subband> <map_resolution>'");
    options = {static_cast<int>(*a), static_cast<int>(*b)};
  }
  tok = next("params");
  ColumnParams params;
  {
    if (tok.size() != 5 || tok[0] != "params") throw ParseError(lineno, "expected 'params <tau0> <max_level> <tol> <shift>'");
    const auto t = detail::parse_double(tok[1]);
    const auto l = detail::parse_int(tok[2]);
    const auto o = detail::parse_double(tok[3]);
    const auto s = detail::parse_double(tok[4]);
    if (!t || !l || !o || !s) throw ParseError(lineno, "malformed params");
    params = {*t, static_cast<int>(*l), *o, *s};
  }

  const int spec_lines = count_of(next("spec"), "spec");
  const int spec_start = lineno;
  std::string spec_text;
  for (int i = 0; i < spec_lines; ++i) {
    next("chain spec line");
    spec_text += line + "\n";
  }
  ChainSpec spec;
  std::istringstream spec_in(spec_text);
  try {
    spec = parse_chain_spec(spec_in);
  } catch (const ParseError& e) {
    rethrow_at(e, spec_start);
  }
  ResonanceChain chain = [&] {
    try {
      return build_chain(spec, options);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(spec_start + 1, e.what());
    }
  }();

  const int tuned = count_of(next("peaks"), "peaks");
  std::vector<std::pair<PeakRef, double>> moves;
  for (int i = 0; i < tuned; ++i) {
    tok = next("peak");
    if (tok.size() != 3 || tok[0] != "peak") throw ParseError(lineno, "expected 'peak L:P <hz>'");
    const auto colon = tok[1].find(':');
    const auto l = colon == std::string::npos ? std::nullopt : detail::parse_int(tok[1].substr(0, colon));
    const auto p = colon == std::string::npos ? std::nullopt : detail::parse_int(tok[1].substr(colon + 1));
    const auto hz = detail::parse_double(tok[2]);
    if (!l || !p || !hz) throw ParseError(lineno, "malformed peak line");
    const PeakRef ref{static_cast<int>(*l), static_cast<int>(*p)};
    if (!chain.has_peak(ref)) throw ParseError(lineno, "no such peak " + tok[1]);
    moves.emplace_back(ref, *hz);
  }
  if (!moves.empty()) {
    try {
      chain = shift_peaks(chain, moves);
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
  }

  const int column_start = lineno;
  std::stringstream rest;
  rest << in.rdbuf();
  try {
    auto column = read_column(rest, std::move(chain), params);
    return State{options, std::move(spec), std::move(column)};
  } catch (const ParseError& e) {
    rethrow_at(e, column_start);
  }
}

void save_state(const std::string& path, const ChainOptions& options, const ArgumentColumn& column) {
  std::ostringstream text;
  write_state(text, options, column);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write state " + path);
  out << text.str();
  if (!out) throw IoError("failed writing state " + path);
}

State load_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read state " + path);
  return read_state(in);
}

}  // namespace ajo
