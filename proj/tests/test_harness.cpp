#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "kaclab/harness.hpp"

using namespace kaclab;

TEST_CASE("model and p0 spec parsing") {
  CHECK(parse_interaction_law("kac", 2).kind() == InteractionLaw::Kind::Kac);
  CHECK(parse_interaction_law("kac(1.57)", 2).angle_kind() == InteractionLaw::AngleKind::Fixed);
  CHECK(parse_interaction_law("inelastic-kac(0.5)", 2).kind() == InteractionLaw::Kind::InelasticKac);
  CHECK(parse_interaction_law("wealth(0.7)", 1).describe() == "wealth(0.69999999999999996)");
  CHECK(parse_interaction_law("wealth-uniform(0.2,0.8)", 1).kind() == InteractionLaw::Kind::Wealth);
  const auto table = parse_interaction_law("table(0.5:1.2:0.1:0.6:0.1;0.5:0.4:0.1:0.6:0.1)", 1);
  REQUIRE(table.atoms().size() == 2);
  CHECK(table.atoms()[0].l == 1.2);
  CHECK_THROWS_AS(parse_interaction_law("nonsense(1)", 1), ConfigError);
  CHECK_THROWS_AS(parse_interaction_law("kac(1,2,3)", 2), ConfigError);

  CHECK(parse_initial_law("gaussian(0,1)").kind() == InitialLaw::Kind::Gaussian);
  CHECK(parse_initial_law("pointmass(2)").kind() == InitialLaw::Kind::PointMass);
  CHECK(parse_initial_law("uniform(0,2)").abs_moment(1.0) == Catch::Approx(1.0));
  CHECK(parse_initial_law("pareto(3,1)").moment_finite_up_to() == 3.0);
  CHECK(parse_initial_law("twopoint(0,1,0.5)").abs_moment(1.0) == 0.5);
  CHECK_THROWS_AS(parse_initial_law("gaussian(0)"), ConfigError);
  CHECK_THROWS_AS(parse_initial_law("cauchy(0,1)"), ConfigError);
}

TEST_CASE("config file parsing") {
  std::istringstream doc(
      "# experiment configuration\n"
      "experiment   = chaos-rate\n"
      "model        = wealth(0.7)\n"
      "p0           = uniform(0,2)   # nonnegative wealth\n"
      "p            = 1\n"
      "n_grid       = 8, 16, 32\n"
      "t_grid       = 0.5, 1\n"
      "replicas     = 4\n"
      "pool_size    = 512\n"
      "ref_time_step = 0.02\n"
      "seed         = 777\n"
      "workers      = 2\n"
      "exact_pool   = false\n"
      "dump_states  = true\n"
      "out          = result.csv\n");
  const auto cfg = parse_config_text(doc);
  CHECK(cfg.kind == ExperimentKind::ChaosRate);
  CHECK(cfg.model == "wealth(0.7)");
  CHECK(cfg.n_grid == std::vector<std::size_t>{8, 16, 32});
  CHECK(cfg.t_grid == std::vector<double>{0.5, 1.0});
  CHECK(cfg.replicas == 4);
  CHECK(cfg.pool_size == 512);
  CHECK(cfg.ref_time_step == 0.02);
  CHECK(cfg.master_seed == 777);
  CHECK(cfg.workers == 2);
  CHECK(cfg.dump_states);
  CHECK(cfg.out == "result.csv");

  std::istringstream bad("frobnicate = 7\n");
  CHECK_THROWS_AS(parse_config_text(bad), ConfigError);
  std::istringstream bad2("experiment chaos-rate\n");
  CHECK_THROWS_AS(parse_config_text(bad2), ConfigError);
}

TEST_CASE("row counts and hygiene on a small chaos-rate run") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::ChaosRate;
  cfg.model = "wealth(0.7)";
  cfg.p0 = "uniform(0,2)";
  cfg.p = 1;
  cfg.n_grid = {4};
  cfg.t_grid = {1.0};
  cfg.replicas = 3;
  cfg.pool_size = 256;
  cfg.master_seed = 99;
  cfg.workers = 1;
  const auto res = run_experiment(cfg);
  CHECK(res.rows.size() == 3);  // one statistic, one cell per replica
  for (const auto& r : res.rows) {
    CHECK(r.experiment == "chaos-rate");
    CHECK(r.statistic == "wpp_emp_ref");
    CHECK(r.n == 4);
    CHECK(std::isfinite(r.value));
    CHECK(r.model_hash.size() == 16);
  }
  CHECK(res.rows[0].replica == 0);
  CHECK(res.rows[2].replica == 2);
}

TEST_CASE("determinism across reruns and worker counts") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::ChaosRate;
  cfg.model = "wealth(0.7)";
  cfg.p0 = "uniform(0,2)";
  cfg.n_grid = {8, 16};
  cfg.t_grid = {0.5, 1.0};
  cfg.replicas = 5;
  cfg.pool_size = 256;
  cfg.master_seed = 1234;
  cfg.workers = 1;
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  cfg.workers = 4;
  const auto c = run_experiment(cfg);
  CHECK(a.csv == b.csv);
  CHECK(a.csv == c.csv);
}

TEST_CASE("per-cell seeding: fewer replicas are a prefix of more") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::ChaosRate;
  cfg.model = "wealth(0.7)";
  cfg.p0 = "uniform(0,2)";
  cfg.n_grid = {8};
  cfg.t_grid = {1.0};
  cfg.replicas = 3;
  cfg.pool_size = 256;
  cfg.master_seed = 4321;
  cfg.workers = 1;
  const auto full = run_experiment(cfg);
  cfg.replicas = 2;
  const auto part = run_experiment(cfg);
  REQUIRE(part.rows.size() == 2);
  for (std::size_t i = 0; i < part.rows.size(); ++i) {
    CHECK(part.rows[i].value == full.rows[i].value);
    CHECK(part.rows[i].seed == full.rows[i].seed);
  }
}

TEST_CASE("theorem-rate experiments refuse failing hypotheses") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::ChaosRate;
  cfg.model = "wealth(0.7)";
  cfg.p0 = "pareto(1.5,1)";
  cfg.p = 2;
  cfg.n_grid = {8};
  cfg.replicas = 2;
  cfg.pool_size = 64;
  try {
    run_experiment(cfg);
    FAIL("expected refusal");
  } catch (const ConfigError& e) {
    // p = 2 with Pareto(1.5): the moment flag binds first and gets named.
    CHECK(std::string(e.what()).find("M_p(P0)") != std::string::npos);
  }
  // moment-decay is not a theorem-rate kind and may proceed
  cfg.kind = ExperimentKind::MomentDecay;
  cfg.t_grid = {0.5};
  cfg.pool_size = 128;
  CHECK_NOTHROW(run_experiment(cfg));
}

TEST_CASE("degenerate fixed point reports exact zeros and refuses the fit") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::ChaosRate;
  cfg.model = "wealth(0.7)";
  cfg.p0 = "pointmass(1)";
  cfg.n_grid = {4, 8, 16};
  cfg.t_grid = {1.0};
  cfg.replicas = 2;
  cfg.pool_size = 64;
  cfg.workers = 1;
  const auto res = run_experiment(cfg);
  for (const auto& r : res.rows) CHECK(r.value == 0.0);
  CHECK(res.summary.rate_fits.empty());
  bool noted = false;
  for (const auto& note : res.summary.notes)
    noted = noted || note.find("gamma fit refused") != std::string::npos;
  CHECK(noted);
}

TEST_CASE("csv render/read round trip") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::MomentDecay;
  cfg.model = "wealth(0.7)";
  cfg.p0 = "uniform(0,2)";
  cfg.t_grid = {0.5, 1.0};
  cfg.replicas = 2;
  cfg.pool_size = 256;
  cfg.workers = 1;
  const auto res = run_experiment(cfg);
  std::istringstream in(res.csv);
  const auto rows = read_csv(in);
  REQUIRE(rows.size() == res.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].statistic == res.rows[i].statistic);
    CHECK(rows[i].value == res.rows[i].value);
    CHECK(rows[i].t == res.rows[i].t);
    CHECK(rows[i].stderr_val.has_value() == res.rows[i].stderr_val.has_value());
    CHECK(rows[i].seed == res.rows[i].seed);
  }
  CHECK(render_csv(rows) == res.csv);
}

TEST_CASE("summarize computes cell means and fits") {
  // synthetic exact power law rows
  std::vector<ReportRow> rows;
  for (std::size_t n : {64, 128, 256}) {
    for (int rep = 0; rep < 2; ++rep) {
      ReportRow r;
      r.experiment = "chaos-rate";
      r.model_hash = "0123456789abcdef";
      r.n = n;
      r.t = 1.0;
      r.replica = rep;
      r.statistic = "wpp_emp_ref";
      r.value = 7.0 * std::pow(static_cast<double>(n), -0.5);
      rows.push_back(r);
    }
  }
  const auto s = summarize(rows);
  REQUIRE(s.rate_fits.size() == 1);
  CHECK(s.rate_fits[0].fit.gamma_hat == Catch::Approx(0.5).margin(1e-12));
  CHECK(s.rate_fits[0].fit.r_squared == Catch::Approx(1.0).margin(1e-12));

  // synthetic exponential decay rows
  std::vector<ReportRow> decay;
  for (double t : {0.5, 1.0, 2.0}) {
    ReportRow r;
    r.experiment = "moment-decay";
    r.model_hash = "0123456789abcdef";
    r.n = 0;
    r.t = t;
    r.replica = 0;
    r.statistic = "moment_2";
    r.value = std::exp(-0.42 * t);
    decay.push_back(r);
  }
  const auto sd = summarize(decay);
  REQUIRE(sd.decay_fits.size() == 1);
  CHECK(sd.decay_fits[0].fit.gamma_hat == Catch::Approx(0.42).margin(1e-10));

  CHECK(summarize({}).cells.empty());
}

TEST_CASE("summary json mirrors the summary") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::ChaosRate;
  cfg.model = "wealth(0.7)";
  cfg.p0 = "uniform(0,2)";
  cfg.n_grid = {8, 16, 32};
  cfg.t_grid = {1.0};
  cfg.replicas = 3;
  cfg.pool_size = 512;
  cfg.workers = 1;
  const auto res = run_experiment(cfg);
  const auto j = summary_to_json(res.summary);
  CHECK(j["schema"] == "kaclab-summary-v1");
  CHECK(j["experiment"] == "chaos-rate");
  CHECK(j["cells"].size() == res.summary.cells.size());
  CHECK(j.contains("noise_floor"));
}

TEST_CASE("moment-decay experiment recovers the c(2) = 0.42 decay") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::MomentDecay;
  cfg.model = "table(1:0.7:0.3:0.7:0.3)";
  cfg.p0 = "gaussian(0,1)";
  cfg.p = 2;
  cfg.t_grid = {0.5, 1.0, 2.0};
  cfg.replicas = 2;
  cfg.pool_size = 20'000;
  cfg.master_seed = 2718;
  const auto res = run_experiment(cfg);
  bool found = false;
  for (const auto& f : res.summary.decay_fits) {
    if (f.statistic != "moment_2") continue;
    found = true;
    CHECK(f.fit.gamma_hat == Catch::Approx(0.42).margin(0.05));
  }
  CHECK(found);
}

TEST_CASE("nanbu-vs-bird experiment emits comparable moments") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::NanbuVsBird;
  cfg.model = "kac";
  cfg.p0 = "gaussian(0,1)";
  cfg.p = 2;
  cfg.n_grid = {30};
  cfg.t_grid = {1.0};
  cfg.replicas = 150;
  cfg.pool_size = 64;
  cfg.master_seed = 555;
  const auto res = run_experiment(cfg);
  double bird = 0, nanbu = 0, bird_se = 0, nanbu_se = 0;
  for (const auto& c : res.summary.cells) {
    if (c.statistic == "bird_m2") {
      bird = c.mean;
      bird_se = c.se;
    }
    if (c.statistic == "nanbu_m2") {
      nanbu = c.mean;
      nanbu_se = c.se;
    }
  }
  CHECK(std::abs(bird - nanbu) <= 3.0 * std::hypot(bird_se, nanbu_se));
}

TEST_CASE("lemma7-audit experiment holds on all desk instances") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::Lemma7Audit;
  cfg.model = "wealth(0.7)";
  cfg.p0 = "uniform(0,2)";
  cfg.replicas = 3;
  cfg.pool_size = 64;
  cfg.master_seed = 31;
  const auto res = run_experiment(cfg);
  std::size_t holds = 0, total = 0;
  for (const auto& r : res.rows) {
    if (r.statistic != "lemma7_holds") continue;
    ++total;
    holds += r.value == 1.0 ? 1 : 0;
  }
  CHECK(total == 3);
  CHECK(holds == 3);
}

TEST_CASE("state and path dumps") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::ChaosRate;
  cfg.model = "wealth(0.7)";
  cfg.p0 = "uniform(0,2)";
  cfg.n_grid = {4};
  cfg.t_grid = {0.5};
  cfg.replicas = 2;
  cfg.pool_size = 64;
  cfg.dump_states = true;
  cfg.workers = 1;
  const auto res = run_experiment(cfg);
  std::istringstream states(res.states_csv);
  std::string header;
  std::getline(states, header);
  CHECK(header == "replica,time,particle_index,state");
  std::size_t lines = 0;
  for (std::string line; std::getline(states, line);) ++lines;
  CHECK(lines == 2 * 4);  // replicas x particles at the single snapshot

  ExperimentConfig dcfg;
  dcfg.kind = ExperimentKind::Decoupling;
  dcfg.model = "wealth(0.7)";
  dcfg.p0 = "uniform(0,2)";
  dcfg.n_grid = {4};
  dcfg.t_grid = {0.5};
  dcfg.replicas = 1;
  dcfg.pool_size = 64;
  dcfg.dump_paths = true;
  dcfg.workers = 1;
  const auto dres = run_experiment(dcfg);
  std::istringstream paths(dres.paths_csv);
  std::getline(paths, header);
  CHECK(header == "replica,time,x1,u1,v1");

  ExperimentConfig ccfg = dcfg;
  ccfg.kind = ExperimentKind::CouplingDistance;
  const auto cres = run_experiment(ccfg);
  std::istringstream cpaths(cres.paths_csv);
  std::getline(cpaths, header);
  CHECK(header == "replica,time,x1,u1");
}

TEST_CASE("config validation") {
  ExperimentConfig cfg;
  cfg.replicas = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.n_grid = {1};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.t_grid = {1.0, 0.5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.p = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
