// Command-line front end: run experiments from a config file or flags,
// summarize result CSVs, and execute the built-in acceptance recipe.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kaclab/acceptance.hpp"
#include "kaclab/harness.hpp"

namespace {

struct RunFlags {
  std::string config_path;
  std::string recipe;
  std::optional<std::string> experiment, model, p0, out;
  std::optional<int> p;
  std::optional<std::string> n_grid, t_grid;
  std::optional<std::size_t> replicas, pool_size, k;
  std::optional<double> ref_time_step;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  bool dump_states = false, dump_paths = false, exact_pool = false;
};

kaclab::ExperimentConfig build_config(const RunFlags& f) {
  kaclab::ExperimentConfig cfg;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw kaclab::ConfigError("cannot open config file: " + f.config_path);
    cfg = kaclab::parse_config_text(in);
  }
  if (f.experiment) cfg.kind = kaclab::experiment_kind_from(*f.experiment);
  if (f.model) cfg.model = *f.model;
  if (f.p0) cfg.p0 = *f.p0;
  if (f.p) cfg.p = *f.p;
  if (f.n_grid) {
    cfg.n_grid.clear();
    for (const auto& tok : kaclab::detail::split(*f.n_grid, ','))
      cfg.n_grid.push_back(std::stoull(kaclab::detail::trim(tok)));
  }
  if (f.t_grid) {
    cfg.t_grid.clear();
    for (const auto& tok : kaclab::detail::split(*f.t_grid, ','))
      cfg.t_grid.push_back(std::stod(kaclab::detail::trim(tok)));
  }
  if (f.replicas) cfg.replicas = *f.replicas;
  if (f.pool_size) cfg.pool_size = *f.pool_size;
  if (f.k) cfg.k = *f.k;
  if (f.ref_time_step) cfg.ref_time_step = *f.ref_time_step;
  if (f.seed) cfg.master_seed = *f.seed;
  if (f.workers) cfg.workers = *f.workers;
  if (f.out) cfg.out = *f.out;
  cfg.dump_states = cfg.dump_states || f.dump_states;
  cfg.dump_paths = cfg.dump_paths || f.dump_paths;
  cfg.exact_pool = cfg.exact_pool || f.exact_pool;
  return cfg;
}

int run_recipe(const std::string& recipe, unsigned workers) {
  if (recipe != "acceptance") {
    std::cerr << "unknown recipe: " << recipe << " (available: acceptance)\n";
    return 2;
  }
  const auto results = kaclab::run_acceptance(workers, &std::cout);
  int failures = 0;
  for (const auto& r : results) failures += r.pass ? 0 : 1;
  std::cout << (failures == 0 ? "acceptance: all criteria pass\n"
                              : "acceptance: " + std::to_string(failures) + " criteria FAILED\n");
  return failures == 0 ? 0 : 1;
}

void print_models() {
  std::cout << "interaction laws (--model):\n"
               "  kac                      uniform-angle Kac rotation\n"
               "  kac(theta)               fixed-angle Kac rotation\n"
               "  inelastic-kac(e)         inelastic Kac, dissipation exponent e > 0\n"
               "  wealth(lambda)           conservative wealth exchange, fixed mixing weight\n"
               "  wealth-uniform(a,b)      mixing weight uniform on [a,b] in [0,1]\n"
               "  table(w:l:r:lt:rt;...)   discrete coefficient table (probabilities sum to 1)\n"
               "\ninitial laws (--p0):\n"
               "  pointmass(c) | uniform(a,b) | gaussian(mean,variance) |\n"
               "  exponential(rate) | pareto(index,scale) | twopoint(x0,x1,w)\n"
               "\nexperiments (--experiment):\n"
               "  chaos-rate | moment-decay | coupling-distance | decoupling |\n"
               "  nanbu-vs-bird | sup-distance | lemma7-audit\n"
               "\nrecipes (--recipe): acceptance\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kaclab - event-driven Monte Carlo lab for generalized Kac particle systems"};
  app.require_subcommand(1);

  RunFlags flags;
  auto* run = app.add_subcommand("run", "run an experiment or a recipe");
  run->add_option("--config", flags.config_path, "config file (key = value lines)");
  run->add_option("--recipe", flags.recipe, "named recipe (acceptance)");
  run->add_option("--experiment", flags.experiment, "experiment kind");
  run->add_option("--model", flags.model, "interaction law spec");
  run->add_option("--p0", flags.p0, "initial law spec");
  run->add_option("--p", flags.p, "Wasserstein order (1 or 2)");
  run->add_option("--n-grid", flags.n_grid, "comma-separated particle counts");
  run->add_option("--t-grid", flags.t_grid, "comma-separated snapshot times");
  run->add_option("--replicas", flags.replicas, "independent replicas per cell");
  run->add_option("--pool-size", flags.pool_size, "reference pool size M (0 = auto)");
  run->add_option("--k", flags.k, "decoupling block size");
  run->add_option("--ref-time-step", flags.ref_time_step, "pool memoization grid step");
  run->add_option("--seed", flags.seed, "master seed");
  run->add_option("--workers", flags.workers, "worker threads (0 = hardware)");
  run->add_option("--out", flags.out, "output CSV path");
  run->add_flag("--dump-states", flags.dump_states, "dump snapshot states CSV");
  run->add_flag("--dump-paths", flags.dump_paths, "dump paired-path CSV");
  run->add_flag("--exact-pool", flags.exact_pool, "build pools at exact event times");

  std::string in_csv, json_out;
  auto* summ = app.add_subcommand("summarize", "aggregate a result CSV");
  summ->add_option("--in", in_csv, "input CSV from a run")->required();
  summ->add_option("--json", json_out, "write JSON summary to this path");

  auto* lm = app.add_subcommand("list-models", "print the model/p0 grammar");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (!flags.recipe.empty()) return run_recipe(flags.recipe, flags.workers.value_or(0));
      const auto cfg = build_config(flags);
      const auto result = kaclab::run_experiment(cfg);
      std::cout << kaclab::render_summary_table(result.summary);
      if (!cfg.out.empty())
        std::cout << "rows: " << result.rows.size() << " -> " << cfg.out << " (+ .summary.json)\n";
      else
        std::cout << result.csv;
      return 0;
    }
    if (summ->parsed()) {
      std::ifstream in(in_csv);
      if (!in) throw std::runtime_error("cannot open: " + in_csv);
      const auto rows = kaclab::read_csv(in);
      const auto summary = kaclab::summarize(rows);
      std::cout << kaclab::render_summary_table(summary);
      if (!json_out.empty()) {
        std::ofstream js(json_out, std::ios::binary);
        js << kaclab::summary_to_json(summary).dump(2) << "\n";
      }
      return 0;
    }
    if (lm->parsed()) {
      print_models();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
