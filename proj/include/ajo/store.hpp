#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "ajo/argument_column.hpp"
#include "ajo/resonance_chain.hpp"

namespace ajo {

struct ExperimentConfig {
  // chain
  std::string chain = "brain-model";  // or a chain spec path
  int peaks_per_subband = 8;
  int map_resolution = 256;
  // dynamics
  double dt = 0.0;        // 0: multi-rate stepping with `fraction` of each clock period
  double fraction = 0.0;  // 0: half the largest stable fraction
  long steps = 2000;
  double gamma = 0.0;
  double window = 0.1;
  double kappa_intra = 1.0;
  double relaxation = 0.1;
  int inject_layer = 0;
  double inject_energy = 1.0;
  std::uint64_t seed = 1;
  // decomposition
  double accept_score = 0.85;
  bool denoise = true;
  bool extrapolate = true;
  // column
  WriteMode mode = WriteMode::single_peak;
  double tau0 = 1.0;
  int max_level = 8;
  double write_shift = 1e-6;
  // query
  int max_cycles = 8;
  double epsilon_converge = 0.02;
  // output
  std::string output_dir = "ajo-out";

  ChainOptions chain_options() const { return {peaks_per_subband, map_resolution}; }
  ColumnParams column_params() const;
};

// key=value lines with '#' comments; unknown keys and out-of-range values raise ConfigError.
ExperimentConfig parse_experiment_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_experiment_config(const std::string& path, ExperimentConfig base = {});
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);
void validate_config(const ExperimentConfig& config);
// AJO_SEED, when set, replaces the seed.
void apply_environment(ExperimentConfig& config);
void write_config(std::ostream& out, const ExperimentConfig& config);

ResonanceChain load_chain(const ExperimentConfig& config);

// ---------------------------------------------------------------- state

inline constexpr int kStateFormatVersion = 1;

struct State {
  ChainOptions options;
  ChainSpec spec;
  ArgumentColumn column;
};

// Build options, column params, chain spec, any peaks that differ from the
// built chain, then the column.
void write_state(std::ostream& out, const ChainOptions& options, const ArgumentColumn& column);
State read_state(std::istream& in);
void save_state(const std::string& path, const ChainOptions& options, const ArgumentColumn& column);
State load_state(const std::string& path);

}  // namespace ajo
