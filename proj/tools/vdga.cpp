// vdga: command-line driver for seeding, single runs, comparisons and rendering.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "vdga/config.hpp"
#include "vdga/harness.hpp"
#include "vdga/simnet.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::string positions;
  std::map<std::string, std::string> overrides;  // config key -> flag value
};

// A failure in loading or validating the configuration.
struct SetupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_override(CLI::App* app, Options& opt, const std::string& flag, const std::string& key,
                  const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&opt, key](const std::string& v) { opt.overrides[key] = v; }, help + " [" + key + "]");
}

void add_common(CLI::App* app, Options& opt) {
  app->add_option("--config", opt.config, "key = value config file");
  app->add_option("--out", opt.out, "output directory");
  add_override(app, opt, "--reps", "experiment.repetitions", "repetitions");
  add_override(app, opt, "--rng-seed", "experiment.rng_seed", "base seed");
  add_override(app, opt, "--g-nodes", "session.g_nodes", "worker nodes");
  add_override(app, opt, "--loss", "link.loss", "per-frame loss probability");
  add_override(app, opt, "--latency-ms", "link.latency_ms", "one-way frame latency");
  add_override(app, opt, "--coverage-target", "ga.coverage_target", "GA stopping coverage");
  add_override(app, opt, "--max-generations", "ga.max_generations", "GA generation cap");
  add_override(app, opt, "--mutation-points", "ga.mutation_points", "1 or 2");
  add_override(app, opt, "--result-threshold", "session.result_threshold",
               "fraction of results the coordinator waits for");
}

vdga::ExperimentSpec load_spec(const Options& opt) {
  try {
    vdga::Config cfg;
    if (!opt.config.empty()) {
      if (!fs::exists(opt.config)) throw SetupError("config file not found: " + opt.config);
      cfg = vdga::Config::load(opt.config);
    }
    for (const auto& [key, value] : opt.overrides) cfg.set(key, value);
    return vdga::experiment_from_config(cfg);
  } catch (const vdga::Error& e) {
    throw SetupError(e.what());
  }
}

fs::path prepare_out(const Options& opt, const vdga::ExperimentSpec& spec) {
  const fs::path dir(opt.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw vdga::IoFailure("cannot create output directory " + dir.string());
  std::ofstream cfg(dir / "effective.cfg");
  if (!cfg) throw vdga::IoFailure("cannot write " + (dir / "effective.cfg").string());
  vdga::write_effective_config(cfg, spec);
  return dir;
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream os(path);
  if (!os) throw vdga::IoFailure("cannot write " + path.string());
  fn(os);
  if (!os) throw vdga::IoFailure("write failed: " + path.string());
}

void cmd_seed(const Options& opt) {
  const auto spec = load_spec(opt);
  const auto dir = prepare_out(opt, spec);
  const auto& s = spec.session;
  vdga::GaConfig ga = s.ga;
  ga.rng_seed = spec.rng_seed;
  const vdga::Population pop = vdga::wire_population(ga, s.roi);
  write_file(dir / "population.csv", [&](std::ostream& os) {
    os << "individual,island,node,x,y\n";
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const auto& c = pop.individuals[i];
      for (std::size_t k = 0; k < c.size(); ++k) {
        os << i << ',' << (i % s.g_nodes) + 1 << ',' << k << ',' << vdga::detail::fixed(c.genes[k].x, 2)
           << ',' << vdga::detail::fixed(c.genes[k].y, 2) << '\n';
      }
    }
  });
  const auto& best = pop.individuals[pop.best_index()];
  write_file(dir / "best_initial.csv", [&](std::ostream& os) { vdga::write_positions_csv(os, best); });
  write_file(dir / "best_initial.svg",
             [&](std::ostream& os) { os << vdga::render_deployment(best, s.roi, s.ga.radius); });
  std::cout << "seeded " << pop.size() << " individuals, best coverage "
            << vdga::format_percent(pop.best_coverage()) << "\n";
}

void cmd_run_centralized(const Options& opt) {
  const auto spec = load_spec(opt);
  const auto dir = prepare_out(opt, spec);
  vdga::RunResult res;
  const auto m = vdga::run_centralized(spec, 0, &res);
  write_file(dir / "metrics.csv", [&](std::ostream& os) {
    os << vdga::kMetricsHeader << '\n' << vdga::format_metrics(m) << '\n';
  });
  write_file(dir / "history.csv", [&](std::ostream& os) { vdga::write_history_csv(os, res.history); });
  write_file(dir / "final.csv", [&](std::ostream& os) { vdga::write_positions_csv(os, res.best); });
  write_file(dir / "deployment.svg", [&](std::ostream& os) {
    os << vdga::render_deployment(res.best, spec.session.roi, spec.session.ga.radius);
  });
  std::cout << "centralized: coverage " << vdga::format_percent(m.coverage) << " after "
            << res.generations << " generations\n";
}

void cmd_run_distributed(const Options& opt) {
  const auto spec = load_spec(opt);
  const auto dir = prepare_out(opt, spec);
  vdga::SessionResult res;
  const auto m = vdga::run_distributed(spec, 0, &res);
  write_file(dir / "metrics.csv", [&](std::ostream& os) {
    os << vdga::kMetricsHeader << '\n' << vdga::format_metrics(m) << '\n';
  });
  write_file(dir / "event_log.csv", [&](std::ostream& os) { vdga::write_event_log(os, res.log); });
  write_file(dir / "summary.json",
             [&](std::ostream& os) { os << vdga::session_summary(res).dump(2) << '\n'; });
  write_file(dir / "final.csv", [&](std::ostream& os) { vdga::write_positions_csv(os, res.final_chromosome); });
  write_file(dir / "deployment.svg", [&](std::ostream& os) {
    os << vdga::render_deployment(res.final_chromosome, spec.session.roi, spec.session.ga.radius);
  });
  std::cout << "distributed: node " << int(res.winner) << " won with "
            << vdga::format_percent(res.decided_coverage) << ", decided at t=" << res.decision_time_ms
            << " ms, " << res.frames_sent << " frames\n";
}

void cmd_compare(const Options& opt) {
  const auto spec = load_spec(opt);
  const auto dir = prepare_out(opt, spec);
  const auto report = vdga::compare_centralized_distributed(spec);
  write_file(dir / "compare.csv", [&](std::ostream& os) { vdga::write_compare_csv(os, report); });
  write_file(dir / "compare_summary.csv",
             [&](std::ostream& os) { vdga::write_compare_summary(os, report); });
  vdga::write_compare_summary(std::cout, report);
}

void cmd_baselines(const Options& opt) {
  const auto spec = load_spec(opt);
  const auto dir = prepare_out(opt, spec);
  const auto rows = vdga::compare_baselines(spec);
  write_file(dir / "baselines.csv", [&](std::ostream& os) { vdga::write_baseline_csv(os, rows); });
  std::cout << "wrote " << rows.size() << " baseline rows\n";
}

void cmd_mutations(const Options& opt) {
  const auto spec = load_spec(opt);
  const auto dir = prepare_out(opt, spec);
  const auto report = vdga::compare_mutation_variants(spec);
  write_file(dir / "variants.csv", [&](std::ostream& os) { vdga::write_variant_csv(os, report); });
  write_file(dir / "traces.csv", [&](std::ostream& os) { vdga::write_trace_csv(os, report); });
  std::cout << "wrote " << report.rows.size() << " variant rows\n";
}

void cmd_render(const Options& opt) {
  const auto spec = load_spec(opt);
  if (opt.positions.empty()) throw SetupError("render needs --positions");
  std::ifstream in(opt.positions);
  if (!in) throw SetupError("cannot open positions file " + opt.positions);
  vdga::Chromosome c;
  try {
    c = vdga::read_positions_csv(in);
  } catch (const vdga::Error& e) {
    throw SetupError(e.what());
  }
  if (c.size() == 0) throw SetupError("no positions in " + opt.positions);
  const auto dir = prepare_out(opt, spec);
  write_file(dir / "deployment.svg", [&](std::ostream& os) {
    os << vdga::render_deployment(c, spec.session.roi, spec.session.ga.radius);
  });
  std::cout << "rendered " << c.size() << " nodes to " << (dir / "deployment.svg").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voronoi-seeded genetic deployment optimizer"};
  app.require_subcommand(1);
  Options opt;

  struct Sub {
    const char* name;
    const char* help;
    void (*fn)(const Options&);
  };
  const Sub subs[] = {
      {"seed", "generate and write the initial population", cmd_seed},
      {"run-centralized", "evolve the whole population on one node", cmd_run_centralized},
      {"run-distributed", "run one simulated coordinator/worker session", cmd_run_distributed},
      {"compare", "paired centralized vs distributed repetitions", cmd_compare},
      {"baselines", "random, Voronoi-only, GA-only and Voronoi+GA at a fixed budget", cmd_baselines},
      {"mutations", "single- vs two-point mutation study", cmd_mutations},
      {"render", "draw a layout as SVG", cmd_render},
  };
  std::map<CLI::App*, void (*)(const Options&)> handlers;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, opt);
    if (std::string(s.name) == "render") sub->add_option("--positions", opt.positions, "node,x,y CSV");
    handlers[sub] = s.fn;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (argc > 1 && std::string(argv[1]).rfind("-", 0) != 0 && !app.get_subcommand_no_throw(argv[1])) {
      std::cerr << vdga::UnknownSubcommand(argv[1]).what() << "\n";
      return 1;
    }
    app.exit(e);
    return 1;
  }

  try {
    for (auto* sub : app.get_subcommands()) handlers.at(sub)(opt);
  } catch (const SetupError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
