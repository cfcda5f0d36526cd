// Command-line front end: chain tools, simulation, decomposition, learning,
// querying and the clique benchmark.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ajo/argument_column.hpp"
#include "ajo/clique_bench.hpp"
#include "ajo/errors.hpp"
#include "ajo/fractal_decomposition.hpp"
#include "ajo/oscillator_dynamics.hpp"
#include "ajo/query_engine.hpp"
#include "ajo/resonance_chain.hpp"
#include "ajo/store.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;
using namespace ajo;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  bool quiet = false;

  // chain
  bool brain_model = false;
  std::string spec_path;
  std::string state_path;
  std::string format = "spec";
  std::string out_path;

  // learn / query / decompose
  std::string image_path;
  std::string graph_path;
  std::string if_path;
  std::string then_path;
  std::string label;
  std::string dot_path;

  std::string bench_config;
};

ExperimentConfig resolve_config(const Options& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) c = load_experiment_config(o.config_path);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(c, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  if (!o.out_dir.empty()) c.output_dir = o.out_dir;
  if (o.brain_model) c.chain = "brain-model";
  if (!o.spec_path.empty()) c.chain = o.spec_path;
  apply_environment(c);
  validate_config(c);
  if (!o.quiet) {
    std::ostringstream text;
    write_config(text, c);
    std::istringstream lines(text.str());
    for (std::string line; std::getline(lines, line);) std::cerr << "# " << line << '\n';
  }
  return c;
}

fs::path output_dir(const ExperimentConfig& c) {
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + c.output_dir);
  return fs::path(c.output_dir);
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Existing state, or a fresh column on the configured chain.
ArgumentColumn open_column(const Options& o, const ExperimentConfig& c) {
  if (!o.state_path.empty() && fs::exists(o.state_path)) return load_state(o.state_path).column;
  return ArgumentColumn(load_chain(c), c.column_params());
}

DecomposeParams decompose_params(const ExperimentConfig& c) {
  DecomposeParams p;
  p.accept_score = c.accept_score;
  p.denoise = c.denoise;
  p.extrapolate = c.extrapolate;
  return p;
}

// Images and seed-graph JSON files are both accepted wherever a pattern is expected.
SeedGraph pattern_from(const std::string& path, const ExperimentConfig& c) {
  if (fs::path(path).extension() == ".json") return seed_graph_from_json(read_file(path));
  return decompose(load_image(path), decompose_params(c));
}

// ---------------------------------------------------------------- chain

int cmd_chain_build(const Options& o) {
  const auto c = resolve_config(o);
  const auto chain = load_chain(c);
  std::cout << "layers=" << chain.layer_count() << "\npeaks=" << chain.peak_count()
            << "\nhash=" << hash_hex(chain_hash(chain)) << '\n';
  if (!o.state_path.empty()) {
    save_state(o.state_path, c.chain_options(), ArgumentColumn(chain, c.column_params()));
    std::cout << "state=" << o.state_path << '\n';
  }
  return 0;
}

int cmd_chain_validate(const Options& o) {
  const auto c = resolve_config(o);
  const auto report = validate_chain(load_chain(c));
  for (const auto& p : report.pairs) {
    std::cout << "pair " << p.inner << '-' << p.inner + 1 << ": ";
    if (p.widest)
      std::cout << "shared " << detail::sci(p.widest->lo) << ".." << detail::sci(p.widest->hi) << " Hz";
    else
      std::cout << "no shared band";
    std::cout << (p.violation ? " VIOLATION" : "") << '\n';
  }
  std::cout << "violations=" << report.violations << '\n';
  return report.violations == 0 ? 0 : 1;
}

int cmd_chain_metrics(const Options& o) {
  const auto c = resolve_config(o);
  const auto m = chain_metrics(load_chain(c));
  std::cout << "bandwidth_decades=" << detail::shortest(m.bandwidth_decades) << '\n'
            << "frp_density=" << detail::shortest(m.frp_density) << '\n'
            << "dense_span_decades=" << detail::shortest(m.dense_span_decades) << '\n'
            << "conscious=" << (m.conscious ? "true" : "false") << '\n'
            << "intelligent_bandwidth=" << detail::shortest(m.intelligent_bandwidth) << '\n'
            << "intelligent_density=" << detail::shortest(m.intelligent_density) << '\n';
  return 0;
}

int cmd_chain_export(const Options& o) {
  const auto c = resolve_config(o);
  const auto chain = o.state_path.empty() ? load_chain(c) : load_state(o.state_path).column.working();
  std::ostringstream text;
  if (o.format == "spec") {
    write_chain_spec(text, spec_of(chain));
  } else {
    text << "layer,peak_id,triplet,sub,role,frequency_hz,intensity,quality_factor,direction\n";
    for (const auto& r : chain.peak_refs()) {
      const auto loc = chain.locate(r);
      const auto& p = chain.peak(r);
      text << r.layer << ',' << r.peak_id << ',' << loc.triplet << ',' << loc.sub << ','
           << to_string(chain.subband_of(r).role) << ',' << detail::sci(p.frequency) << ','
           << detail::shortest(p.intensity) << ',' << detail::shortest(p.quality_factor) << ','
           << (p.direction == Direction::positive ? "p" : "n") << '\n';
    }
  }
  if (o.out_path.empty())
    std::cout << text.str();
  else
    write_file(o.out_path, text.str());
  return 0;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Options& o) {
  const auto c = resolve_config(o);
  const auto chain = o.state_path.empty() ? load_chain(c) : load_state(o.state_path).column.working();
  NetworkParams np;
  np.coupling_window = c.window;
  np.dissipation = c.gamma;
  np.kappa_intra = c.kappa_intra;
  np.relaxation = c.relaxation;
  np.seed = c.seed;
  auto net = build_network(chain, np);
  if (c.inject_layer >= static_cast<int>(net.layer_count()))
    throw PreconditionError("inject_layer " + std::to_string(c.inject_layer) + " is outside the chain");
  inject_energy(net, c.inject_layer, c.inject_energy);

  double fraction = c.fraction;
  if (c.dt == 0.0 && fraction == 0.0) {
    std::vector<double> fmax(net.layer_count(), 0.0);
    for (std::size_t i = 0; i < net.size(); ++i)
      fmax[net.layer_of[i]] = std::max(fmax[net.layer_of[i]], net.states[i].natural_frequency);
    fraction = 0.1;
    for (std::size_t l = 0; l < fmax.size(); ++l)
      if (fmax[l] > 0) fraction = std::min(fraction, 0.5 * 0.1 / (net.layer_period[l] * fmax[l]));
  }

  std::ostringstream order, energy;
  order << "time,r\n";
  energy << "time";
  for (std::size_t l = 0; l < net.layer_count(); ++l) energy << ",layer_" << l;
  energy << '\n';
  auto record = [&] {
    order << detail::shortest(net.time) << ',' << detail::shortest(order_parameter(net)) << '\n';
    energy << detail::shortest(net.time);
    for (double e : layer_energies(net)) energy << ',' << detail::shortest(e);
    energy << '\n';
  };
  record();
  for (long s = 0; s < c.steps; ++s) {
    if (c.dt > 0.0)
      step(net, c.dt);
    else
      step_multirate(net, fraction);
    record();
  }
  const auto dir = output_dir(c);
  write_file(dir / "order_parameter.csv", order.str());
  write_file(dir / "energy_by_layer.csv", energy.str());
  std::cout << "steps=" << c.steps << "\ntime=" << detail::sci(net.time) << "\nr=" << detail::shortest(order_parameter(net))
            << "\ntotal_energy=" << detail::shortest(net.total_energy()) << '\n';
  const auto le = layer_energies(net);
  for (std::size_t l = 0; l < le.size(); ++l) std::cout << "layer_" << l << '=' << detail::sci(le[l]) << '\n';
  return 0;
}

// ---------------------------------------------------------------- patterns

int cmd_decompose(const Options& o) {
  const auto c = resolve_config(o);
  const auto graph = decompose(load_image(o.image_path), decompose_params(c));
  const auto json = seed_graph_to_json(graph);
  if (o.out_path.empty())
    std::cout << json << '\n';
  else
    write_file(o.out_path, json + "\n");
  if (!o.dot_path.empty()) {
    std::ostringstream dot;
    write_dot(dot, graph);
    write_file(o.dot_path, dot.str());
  }
  if (!o.quiet) std::cerr << "# seeds=" << graph.seeds.size() << " edges=" << graph.edges.size() << '\n';
  return 0;
}

int cmd_learn(const Options& o) {
  const auto c = resolve_config(o);
  auto column = open_column(o, c);
  auto arg = argument_from_graphs(column.pristine(), pattern_from(o.if_path, c), pattern_from(o.then_path, c), o.label);
  write_argument(column, std::move(arg), column.empty() ? c.mode : column.mode());
  save_state(o.state_path, c.chain_options(), column);
  std::cout << "argument=" << column.size() - 1 << "\narguments=" << column.size() << "\nrules=" << column.rule_count()
            << "\nstate=" << o.state_path << '\n';
  return 0;
}

void write_scores(const fs::path& path, const Answer& ans, const ArgumentColumn& column) {
  std::ostringstream csv;
  csv << "rank,argument,label,score,matched\n";
  for (std::size_t i = 0; i < ans.matched_arguments.size(); ++i) {
    const auto& s = ans.matched_arguments[i];
    csv << i + 1 << ',' << s.argument << ',' << column.argument(s.argument).label << ',' << detail::shortest(s.score)
        << ',' << (s.matched ? "true" : "false") << '\n';
  }
  write_file(path, csv.str());
}

int cmd_query(const Options& o) {
  const auto c = resolve_config(o);
  const auto column = open_column(o, c);
  if (column.empty()) throw EmptyColumnError("no arguments have been learned; run 'learn' first");
  Query q = o.graph_path.empty() ? Query::from_image(load_image(o.image_path), c.max_cycles)
                                 : Query::from_graph(seed_graph_from_json(read_file(o.graph_path)), c.max_cycles);
  q.epsilon_converge = c.epsilon_converge;
  AskParams params;
  params.decompose = decompose_params(c);
  const auto ans = ask(column, column.pristine(), q, params);
  const auto json = answer_to_json(ans);
  if (o.out_path.empty())
    std::cout << json << '\n';
  else
    write_file(o.out_path, json + "\n");
  write_scores(output_dir(c) / "query_scores.csv", ans, column);
  return 0;
}

// ---------------------------------------------------------------- bench

int cmd_bench(const Options& o) {
  const auto c = resolve_config(o);
  BenchConfig bc;
  if (!o.bench_config.empty()) {
    std::ifstream in(o.bench_config);
    if (!in) throw IoError("cannot read bench config " + o.bench_config);
    bc = parse_bench_config(in);
  }
  if (const char* s = std::getenv("AJO_SEED"); s && *s) bc.seed = c.seed;
  const auto rows = run_bench(bc);
  std::ostringstream csv;
  write_bench_csv(csv, rows);
  if (o.out_path.empty())
    std::cout << csv.str();
  else
    write_file(o.out_path, csv.str());
  for (const auto& r : rows)
    if (r.verified && !r.agreement) throw PreconditionError("reply-back disagreed with brute force");
  return 0;
}

// ---------------------------------------------------------------- demo

GridImage shape_image(PrimitiveKind kind, int dx = 0, int dy = 0) {
  Bitmap b(48, 48);
  const int cx = 24 + dx, cy = 24 + dy;
  switch (kind) {
    case PrimitiveKind::circle:
      draw_circle(b, cx, cy, 10);
      break;
    case PrimitiveKind::square:
      draw_line(b, {cx - 9, cy - 9}, {cx + 9, cy - 9});
      draw_line(b, {cx + 9, cy - 9}, {cx + 9, cy + 9});
      draw_line(b, {cx + 9, cy + 9}, {cx - 9, cy + 9});
      draw_line(b, {cx - 9, cy + 9}, {cx - 9, cy - 9});
      break;
    case PrimitiveKind::triangle:
      draw_line(b, {cx, cy - 11}, {cx + 10, cy + 6});
      draw_line(b, {cx + 10, cy + 6}, {cx - 10, cy + 6});
      draw_line(b, {cx - 10, cy + 6}, {cx, cy - 11});
      break;
    default:
      draw_line(b, {cx - 12, cy - 3}, {cx + 12, cy + 3});
  }
  return to_image(b);
}

int cmd_demo(const Options& o) {
  auto opts = o;
  opts.brain_model = true;
  const auto c = resolve_config(opts);
  const auto chain = load_chain(c);
  std::cout << "chain: " << chain.layer_count() << " layers, " << chain.peak_count() << " peaks, "
            << (chain_metrics(chain).conscious ? "conscious" : "not conscious") << '\n';
  ArgumentColumn column(chain, c.column_params());
  const std::vector<std::pair<PrimitiveKind, PrimitiveKind>> lessons{{PrimitiveKind::circle, PrimitiveKind::square},
                                                                     {PrimitiveKind::triangle, PrimitiveKind::straight_line},
                                                                     {PrimitiveKind::square, PrimitiveKind::circle}};
  const auto dp = decompose_params(c);
  for (const auto& [a, b] : lessons) {
    const std::string label = std::string(to_string(a)) + "->" + to_string(b);
    write_argument(column, argument_from_graphs(chain, decompose(shape_image(a), dp), decompose(shape_image(b), dp), label));
    std::cout << "learned " << label << " (rules " << column.rule_count() << ")\n";
  }
  auto noisy = shape_image(PrimitiveKind::circle, 1, -1);
  noisy.set(3, 40, 1.0);
  AskParams params;
  params.decompose = dp;
  Query q = Query::from_image(noisy, c.max_cycles);
  q.epsilon_converge = c.epsilon_converge;
  const auto ans = ask(column, chain, q, params);
  std::cout << "query: circle shifted by (1, -1) with a stray cell\n";
  for (const auto& s : ans.matched_arguments)
    std::cout << "  " << column.argument(s.argument).label << " score " << detail::shortest(s.score)
              << (s.matched ? "" : " (umbrella)") << '\n';
  std::cout << "answer after " << ans.cycles_used << " cycle(s), " << (ans.converged ? "converged" : "not converged")
            << ":\n";
  for (const auto& s : ans.graph.seeds)
    std::cout << "  " << to_string(s.kind) << " at (" << detail::shortest(s.cx) << ", " << detail::shortest(s.cy)
              << ") scale " << detail::shortest(s.scale) << '\n';
  std::cout << answer_to_json(ans) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ajo: resonance chains, argument columns and pattern queries"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "key=value experiment config");
  app.add_option("--set", o.overrides, "override one config key (key=value), repeatable");
  app.add_option("--out-dir", o.out_dir, "output directory for CSV files");
  app.add_flag("--quiet", o.quiet, "do not echo the resolved config");

  int code = 0;
  auto wrap = [&](int (*fn)(const Options&)) { return [&, fn] { code = fn(o); }; };

  auto* chain = app.add_subcommand("chain", "build, validate, measure or export a resonance chain");
  chain->require_subcommand(1);
  auto chain_source = [&](CLI::App* sub) {
    auto* bm = sub->add_flag("--brain-model", o.brain_model, "use the bundled 12-level brain model");
    auto* sp = sub->add_option("--spec", o.spec_path, "chain spec file")->check(CLI::ExistingFile);
    bm->excludes(sp);
  };
  auto* build = chain->add_subcommand("build", "build a chain and optionally save an empty state");
  chain_source(build);
  build->add_option("--state", o.state_path, "state file to write");
  build->callback(wrap(cmd_chain_build));
  auto* validate = chain->add_subcommand("validate", "check the adjacent-layer overlap rule");
  chain_source(validate);
  validate->callback(wrap(cmd_chain_validate));
  auto* metrics = chain->add_subcommand("metrics", "bandwidth, FRP density and the consciousness flag");
  chain_source(metrics);
  metrics->callback(wrap(cmd_chain_metrics));
  auto* exp = chain->add_subcommand("export", "write the chain as a spec or a peak CSV");
  chain_source(exp);
  exp->add_option("--state", o.state_path, "export the working chain of a saved state");
  exp->add_option("--format", o.format, "spec or csv")->check(CLI::IsMember({"spec", "csv"}));
  exp->add_option("--out", o.out_path, "output file (default stdout)");
  exp->callback(wrap(cmd_chain_export));

  auto* sim = app.add_subcommand("simulate", "inject energy and run the oscillator network");
  chain_source(sim);
  sim->add_option("--state", o.state_path, "simulate the working chain of a saved state")->check(CLI::ExistingFile);
  sim->callback(wrap(cmd_simulate));

  auto* dec = app.add_subcommand("decompose", "decompose an image into a seed graph");
  dec->add_option("--image", o.image_path, "PGM (P2) or digit-grid text image")->required()->check(CLI::ExistingFile);
  dec->add_option("--out", o.out_path, "JSON output file (default stdout)");
  dec->add_option("--dot", o.dot_path, "also write a DOT graph");
  dec->callback(wrap(cmd_decompose));

  auto* learn = app.add_subcommand("learn", "write one if/then argument into a state's column");
  learn->add_option("--state", o.state_path, "state file (created when missing)")->required();
  learn->add_option("--if", o.if_path, "image or seed-graph JSON")->required()->check(CLI::ExistingFile);
  learn->add_option("--then", o.then_path, "image or seed-graph JSON")->required()->check(CLI::ExistingFile);
  learn->add_option("--label", o.label, "argument label");
  chain_source(learn);
  learn->callback(wrap(cmd_learn));

  auto* query = app.add_subcommand("query", "ask a learned column with an image or seed graph");
  query->add_option("--state", o.state_path, "state file");
  auto* qi = query->add_option("--image", o.image_path, "query image")->check(CLI::ExistingFile);
  auto* qg = query->add_option("--graph", o.graph_path, "query seed-graph JSON")->check(CLI::ExistingFile);
  qi->excludes(qg);
  query->add_option("--out", o.out_path, "answer JSON file (default stdout)");
  chain_source(query);
  query->callback([&] {
    if (o.image_path.empty() && o.graph_path.empty()) throw CLI::RequiredError("--image or --graph");
    code = cmd_query(o);
  });

  auto* bench = app.add_subcommand("bench", "clique benchmark: reply-back against brute force");
  bench->add_option("--bench-config", o.bench_config, "key=value bench config")->check(CLI::ExistingFile);
  bench->add_option("--out", o.out_path, "CSV output file (default stdout)");
  bench->callback(wrap(cmd_bench));

  auto* demo = app.add_subcommand("demo", "learn three shape arguments on the brain model and query one");
  demo->callback(wrap(cmd_demo));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  } catch (const ajo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return 1;
  } catch (const std::exception&) {
    std::cerr << "error: unexpected failure\n";
    return 1;
  }
  return code;
}
