#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kaclab/coupling.hpp"
#include "kaclab/events.hpp"
#include "kaclab/laws.hpp"
#include "kaclab/metrics.hpp"
#include "kaclab/numeric.hpp"
#include "kaclab/particles.hpp"
#include "kaclab/wild.hpp"

namespace kaclab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Model / initial-law spec strings.
//   kac | kac(theta) | inelastic-kac(e) | wealth(lambda) |
//   wealth-uniform(a,b) | table(w:l:r:lt:rt;...)
//   pointmass(c) | uniform(a,b) | gaussian(mean,var) | exponential(rate) |
//   pareto(index,scale) | twopoint(x0,x1,w)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_call(const std::string& spec, std::string& name, std::vector<double>& args,
                       std::string& raw_args) {
  const std::string s = trim(spec);
  const auto lp = s.find('(');
  if (lp == std::string::npos) {
    name = s;
    raw_args.clear();
    args.clear();
    return true;
  }
  if (s.back() != ')') return false;
  name = trim(s.substr(0, lp));
  raw_args = s.substr(lp + 1, s.size() - lp - 2);
  args.clear();
  if (trim(raw_args).empty()) return true;
  for (const auto& tok : split(raw_args, ',')) {
    try {
      args.push_back(std::stod(trim(tok)));
    } catch (...) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

inline InteractionLaw parse_interaction_law(const std::string& spec, int p) {
  std::string name, raw;
  std::vector<double> args;
  if (!detail::parse_call(spec, name, args, raw) && name != "table")
    throw ConfigError("bad model spec: " + spec);
  if (name == "kac") {
    if (args.empty()) return InteractionLaw::kac(p);
    if (args.size() == 1) return InteractionLaw::kac_fixed_angle(args[0], p);
  } else if (name == "inelastic-kac" && args.size() == 1) {
    return InteractionLaw::inelastic_kac(args[0], p);
  } else if (name == "wealth" && args.size() == 1) {
    return InteractionLaw::wealth(args[0], p);
  } else if (name == "wealth-uniform" && args.size() == 2) {
    return InteractionLaw::wealth_uniform_weight(args[0], args[1], p);
  } else if (name == "table") {
    std::vector<TableAtom> atoms;
    for (const auto& entry : detail::split(raw, ';')) {
      const auto fields = detail::split(entry, ':');
      if (fields.size() != 5) throw ConfigError("bad table atom: " + entry);
      atoms.push_back({std::stod(fields[0]), std::stod(fields[1]), std::stod(fields[2]),
                       std::stod(fields[3]), std::stod(fields[4])});
    }
    return InteractionLaw::discrete_table(std::move(atoms), p);
  }
  throw ConfigError("bad model spec: " + spec);
}

inline InitialLaw parse_initial_law(const std::string& spec) {
  std::string name, raw;
  std::vector<double> args;
  if (!detail::parse_call(spec, name, args, raw)) throw ConfigError("bad p0 spec: " + spec);
  if (name == "pointmass" && args.size() == 1) return InitialLaw::point_mass(args[0]);
  if (name == "uniform" && args.size() == 2) return InitialLaw::uniform(args[0], args[1]);
  if (name == "gaussian" && args.size() == 2) return InitialLaw::gaussian(args[0], args[1]);
  if (name == "exponential" && args.size() == 1) return InitialLaw::exponential(args[0]);
  if (name == "pareto" && args.size() == 2) return InitialLaw::pareto(args[0], args[1]);
  if (name == "twopoint" && args.size() == 3) return InitialLaw::two_point(args[0], args[1], args[2]);
  throw ConfigError("bad p0 spec: " + spec);
}

// ---------------------------------------------------------------------------
// Experiment configuration.
// ---------------------------------------------------------------------------

enum class ExperimentKind {
  ChaosRate,
  MomentDecay,
  CouplingDistance,
  Decoupling,
  NanbuVsBird,
  SupDistance,
  Lemma7Audit,
};

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::ChaosRate: return "chaos-rate";
    case ExperimentKind::MomentDecay: return "moment-decay";
    case ExperimentKind::CouplingDistance: return "coupling-distance";
    case ExperimentKind::Decoupling: return "decoupling";
    case ExperimentKind::NanbuVsBird: return "nanbu-vs-bird";
    case ExperimentKind::SupDistance: return "sup-distance";
    case ExperimentKind::Lemma7Audit: return "lemma7-audit";
  }
  throw std::logic_error("unreachable");
}

inline ExperimentKind experiment_kind_from(const std::string& s) {
  for (auto k : {ExperimentKind::ChaosRate, ExperimentKind::MomentDecay,
                 ExperimentKind::CouplingDistance, ExperimentKind::Decoupling,
                 ExperimentKind::NanbuVsBird, ExperimentKind::SupDistance,
                 ExperimentKind::Lemma7Audit})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment kind: " + s);
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::ChaosRate;
  std::string model = "wealth(0.7)";
  std::string p0 = "uniform(0,2)";
  int p = 1;
  std::vector<std::size_t> n_grid{64, 128, 256};
  std::vector<double> t_grid{1.0};
  std::size_t replicas = 8;
  std::size_t pool_size = 0;  // 0: max(4096, 4 * max N)
  double ref_time_step = 0.01;
  std::uint64_t master_seed = 1;
  unsigned workers = 0;  // 0: hardware concurrency
  std::size_t k = 2;     // decoupling block size
  bool exact_pool = false;
  bool dump_states = false;
  bool dump_paths = false;
  std::string out;

  void validate() const {
    if (replicas < 1) throw ConfigError("replicas must be >= 1");
    if (n_grid.empty()) throw ConfigError("n_grid must be nonempty");
    for (auto n : n_grid)
      if (n < 2) throw ConfigError("n_grid entries must be >= 2");
    if (t_grid.empty()) throw ConfigError("t_grid must be nonempty");
    for (double t : t_grid)
      if (!(t > 0.0)) throw ConfigError("t_grid entries must be positive");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
      if (!(t_grid[i] > t_grid[i - 1])) throw ConfigError("t_grid must be strictly increasing");
    if (!(ref_time_step > 0.0)) throw ConfigError("ref_time_step must be positive");
    if (p != 1 && p != 2) throw ConfigError("p must be 1 or 2");
  }

  std::size_t effective_pool_size() const {
    if (pool_size > 0) return pool_size;
    std::size_t max_n = 0;
    for (auto n : n_grid) max_n = std::max(max_n, n);
    return std::max<std::size_t>(4096, 4 * max_n);
  }
};

// Single self-describing key-value document; '#' starts a comment.
inline ExperimentConfig parse_config_text(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    auto as_bool = [&] {
      if (val == "true" || val == "1") return true;
      if (val == "false" || val == "0") return false;
      throw ConfigError("config key " + key + ": expected boolean");
    };
    if (key == "experiment") cfg.kind = experiment_kind_from(val);
    else if (key == "model") cfg.model = val;
    else if (key == "p0") cfg.p0 = val;
    else if (key == "p") cfg.p = std::stoi(val);
    else if (key == "n_grid") {
      cfg.n_grid.clear();
      for (const auto& tok : detail::split(val, ','))
        cfg.n_grid.push_back(static_cast<std::size_t>(std::stoull(detail::trim(tok))));
    } else if (key == "t_grid") {
      cfg.t_grid.clear();
      for (const auto& tok : detail::split(val, ',')) cfg.t_grid.push_back(std::stod(detail::trim(tok)));
    } else if (key == "replicas") cfg.replicas = std::stoull(val);
    else if (key == "pool_size") cfg.pool_size = std::stoull(val);
    else if (key == "ref_time_step") cfg.ref_time_step = std::stod(val);
    else if (key == "seed") cfg.master_seed = std::stoull(val);
    else if (key == "workers") cfg.workers = static_cast<unsigned>(std::stoul(val));
    else if (key == "k") cfg.k = std::stoull(val);
    else if (key == "exact_pool") cfg.exact_pool = as_bool();
    else if (key == "dump_states") cfg.dump_states = as_bool();
    else if (key == "dump_paths") cfg.dump_paths = as_bool();
    else if (key == "out") cfg.out = val;
    else throw ConfigError("unknown config key: " + key);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Report rows and CSV.
// ---------------------------------------------------------------------------

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct ReportRow {
  std::string experiment;
  std::string model_hash;
  std::size_t n = 0;
  double t = 0.0;
  std::int64_t replica = 0;
  std::string statistic;
  double value = 0.0;
  std::optional<double> stderr_val;
  std::uint64_t seed = 0;
};

inline constexpr const char* kCsvSchema = "experiment,model_hash,N,t,replica,statistic,value,stderr,seed";

inline void sort_rows(std::vector<ReportRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.experiment, a.n, a.t, a.replica, a.statistic) <
           std::tie(b.experiment, b.n, b.t, b.replica, b.statistic);
  });
}

inline std::string render_csv(const std::vector<ReportRow>& rows) {
  std::string out = "# kaclab-csv v1\n";
  out += kCsvSchema;
  out += "\n";
  for (const auto& r : rows) {
    out += r.experiment + "," + r.model_hash + "," + std::to_string(r.n) + "," + fmt_g17(r.t) + "," +
           std::to_string(r.replica) + "," + r.statistic + "," + fmt_g17(r.value) + ",";
    if (r.stderr_val) out += fmt_g17(*r.stderr_val);
    out += "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

inline std::vector<ReportRow> read_csv(std::istream& in) {
  std::vector<ReportRow> rows;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != kCsvSchema) throw std::runtime_error("read_csv: unexpected header: " + line);
      saw_header = true;
      continue;
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 9) throw std::runtime_error("read_csv: bad row: " + line);
    ReportRow r;
    r.experiment = f[0];
    r.model_hash = f[1];
    r.n = std::stoull(f[2]);
    r.t = std::stod(f[3]);
    r.replica = std::stoll(f[4]);
    r.statistic = f[5];
    r.value = std::stod(f[6]);
    if (!f[7].empty()) r.stderr_val = std::stod(f[7]);
    r.seed = std::stoull(f[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Summary.
// ---------------------------------------------------------------------------

struct CellStat {
  std::string statistic;
  std::size_t n = 0;
  double t = 0.0;
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

struct RateFitRow {
  std::string statistic;
  double t = 0.0;
  RateFitResult fit;
};

struct DecayFitRow {
  std::string statistic;
  RateFitResult fit;
};

struct NoiseFloorRow {
  double t = 0.0;
  double value = 0.0;
};

struct Summary {
  std::string experiment;
  std::string model;
  std::string p0;
  int p = 1;
  std::vector<CellStat> cells;
  std::vector<RateFitRow> rate_fits;
  std::vector<DecayFitRow> decay_fits;
  std::vector<NoiseFloorRow> noise_floor;
  std::vector<std::string> notes;
};

inline Summary summarize(const std::vector<ReportRow>& rows) {
  Summary s;
  if (rows.empty()) return s;
  s.experiment = rows.front().experiment;
  // Group values by (statistic, N, t); cells with no finite aggregate are omitted.
  std::map<std::tuple<std::string, std::size_t, double>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.statistic, r.n, r.t}].push_back(r.value);
  for (const auto& [key, vals] : groups) {
    const auto ms = mean_se(vals);
    CellStat c;
    c.statistic = std::get<0>(key);
    c.n = std::get<1>(key);
    c.t = std::get<2>(key);
    c.mean = ms.mean;
    c.se = ms.se;
    c.count = vals.size();
    s.cells.push_back(std::move(c));
  }

  // Power-law fits across N per (statistic, t) whenever there are >= 3
  // distinct N with positive means.
  std::map<std::pair<std::string, double>, std::vector<FitPoint>> by_stat_t;
  std::map<std::string, std::vector<FitPoint>> decay_pts;
  for (const auto& c : s.cells) {
    if (c.n > 0) by_stat_t[{c.statistic, c.t}].push_back({static_cast<double>(c.n), c.mean});
    decay_pts[c.statistic].push_back({c.t, c.mean});
  }
  for (const auto& [key, pts] : by_stat_t) {
    if (pts.size() < 3) continue;
    bool positive = true;
    for (const auto& pt : pts) positive = positive && pt.value > 0.0;
    if (!positive) {
      s.notes.push_back("gamma fit refused for " + key.first + " at t=" + fmt_g17(key.second) +
                        ": non-positive cell means (exact-zero cells reported as-is)");
      continue;
    }
    try {
      s.rate_fits.push_back({key.first, key.second, fit_power_law(pts)});
    } catch (const std::exception& e) {
      s.notes.push_back("gamma fit refused for " + key.first + ": " + e.what());
    }
  }
  if (s.experiment == to_string(ExperimentKind::MomentDecay)) {
    for (const auto& [stat, pts] : decay_pts) {
      if (pts.size() < 3) continue;
      bool positive = true;
      for (const auto& pt : pts) positive = positive && pt.value > 0.0;
      if (!positive) continue;
      try {
        s.decay_fits.push_back({stat, fit_exp_decay(pts)});
      } catch (const std::exception&) {
      }
    }
  }
  return s;
}

inline std::string render_summary_table(const Summary& s) {
  std::ostringstream os;
  os << "experiment: " << s.experiment << "\n";
  if (!s.model.empty()) os << "model: " << s.model << "  p0: " << s.p0 << "  p: " << s.p << "\n";
  char buf[256];
  os << "\n  statistic            N        t        mean          se            count\n";
  for (const auto& c : s.cells) {
    std::snprintf(buf, sizeof(buf), "  %-20s %-8zu %-8g %-13.6g %-13.6g %zu\n", c.statistic.c_str(),
                  c.n, c.t, c.mean, c.se, c.count);
    os << buf;
  }
  for (const auto& f : s.rate_fits) {
    std::snprintf(buf, sizeof(buf), "fit %s @ t=%g: gamma_hat=%.4f intercept=%.4f r2=%.4f (%zu points)\n",
                  f.statistic.c_str(), f.t, f.fit.gamma_hat, f.fit.intercept, f.fit.r_squared,
                  f.fit.n_points);
    os << buf;
  }
  for (const auto& f : s.decay_fits) {
    std::snprintf(buf, sizeof(buf), "decay fit %s: rate=%.4f intercept=%.4f r2=%.4f (%zu points)\n",
                  f.statistic.c_str(), f.fit.gamma_hat, f.fit.intercept, f.fit.r_squared,
                  f.fit.n_points);
    os << buf;
  }
  for (const auto& nf : s.noise_floor) {
    std::snprintf(buf, sizeof(buf), "reference noise floor @ t=%g: ~%.3g\n", nf.t, nf.value);
    os << buf;
  }
  for (const auto& note : s.notes) os << "note: " << note << "\n";
  return os.str();
}

inline nlohmann::json summary_to_json(const Summary& s) {
  nlohmann::json j;
  j["schema"] = "kaclab-summary-v1";
  j["experiment"] = s.experiment;
  j["model"] = s.model;
  j["p0"] = s.p0;
  j["p"] = s.p;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : s.cells)
    j["cells"].push_back({{"statistic", c.statistic},
                          {"N", c.n},
                          {"t", c.t},
                          {"mean", c.mean},
                          {"stderr", c.se},
                          {"count", c.count}});
  j["rate_fits"] = nlohmann::json::array();
  for (const auto& f : s.rate_fits)
    j["rate_fits"].push_back({{"statistic", f.statistic},
                              {"t", f.t},
                              {"gamma_hat", f.fit.gamma_hat},
                              {"intercept", f.fit.intercept},
                              {"r_squared", f.fit.r_squared},
                              {"n_points", f.fit.n_points}});
  j["decay_fits"] = nlohmann::json::array();
  for (const auto& f : s.decay_fits)
    j["decay_fits"].push_back({{"statistic", f.statistic},
                               {"rate", f.fit.gamma_hat},
                               {"intercept", f.fit.intercept},
                               {"r_squared", f.fit.r_squared},
                               {"n_points", f.fit.n_points}});
  j["noise_floor"] = nlohmann::json::array();
  for (const auto& nf : s.noise_floor) j["noise_floor"].push_back({{"t", nf.t}, {"value", nf.value}});
  j["notes"] = s.notes;
  return j;
}

// ---------------------------------------------------------------------------
// Experiment driver.
// ---------------------------------------------------------------------------

struct ExperimentResult {
  std::vector<ReportRow> rows;
  Summary summary;
  std::string csv;
  std::string states_csv;  // nonempty when dump_states is set
  std::string paths_csv;   // nonempty when dump_paths is set
};

namespace detail {

inline constexpr std::uint64_t kCellTag = 0xCE11;
inline constexpr std::uint64_t kRefPoolTag = 0x9001;
inline constexpr std::uint64_t kGridPoolTag = 0x6A1D;

inline std::uint64_t cell_seed(const ExperimentConfig& cfg, std::size_t n, std::size_t t_idx,
                               std::size_t replica) {
  return seed_chain({cfg.master_seed, static_cast<std::uint64_t>(cfg.kind), n, t_idx, replica, kCellTag});
}

inline double wpp_vs_pool(std::span<const double> sample, const ReferencePool& pool, int p) {
  if (pool.analytic_law()) return wpp_vs_analytic(sample, *pool.analytic_law(), p);
  const double w = w_p_quantile(sample, pool.samples(), p);
  return p == 1 ? w : w * w;
}

// Heuristic pool-noise scale: half of the W_p distance between two random
// halves of the pool, which estimates E W_p(pool, P_t).
inline double pool_noise_floor(const ReferencePool& pool, int p, std::uint64_t seed) {
  if (pool.analytic_law() || pool.size() < 16) return 0.0;
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  CounterRng rng(seed_chain({seed, 0xF1008}));
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.next_index(i)]);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < idx.size(); ++i)
    (i % 2 == 0 ? a : b).push_back(pool.samples()[idx[i]]);
  return 0.5 * w_p_quantile(a, b, p);
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const InteractionLaw law = parse_interaction_law(cfg.model, cfg.p);
  const InitialLaw p0 = parse_initial_law(cfg.p0);
  const std::string model_hash = fnv1a_hex(law.describe() + "|" + p0.describe() + "|p=" + std::to_string(cfg.p));

  Summary pre_summary;
  pre_summary.model = cfg.model;
  pre_summary.p0 = cfg.p0;
  pre_summary.p = cfg.p;

  const bool theorem_rate_kind =
      cfg.kind == ExperimentKind::ChaosRate || cfg.kind == ExperimentKind::CouplingDistance ||
      cfg.kind == ExperimentKind::Decoupling || cfg.kind == ExperimentKind::SupDistance;
  if (theorem_rate_kind) {
    const auto rep = check_theorem_hypotheses(law, p0);
    if (!rep.all_pass())
      throw ConfigError("refusing " + to_string(cfg.kind) +
                        " experiment: hypotheses fail: " + rep.first_failure());
  }

  const std::size_t pool_m = cfg.effective_pool_size();
  std::size_t max_n = 0;
  for (auto n : cfg.n_grid) max_n = std::max(max_n, n);
  std::vector<std::string> notes;
  if (theorem_rate_kind && pool_m < max_n * max_n)
    notes.push_back("reference pool size M=" + std::to_string(pool_m) + " is below N_max^2=" +
                    std::to_string(max_n * max_n) +
                    "; pool noise ~ M^-1/2 may sit near the N^-gamma signal");

  // Reference pools per t for empirical-vs-P_t statistics; shared across
  // cells, seeded independently of them.
  std::vector<std::shared_ptr<const ReferencePool>> ref_pools;
  const bool needs_ref =
      cfg.kind == ExperimentKind::ChaosRate || cfg.kind == ExperimentKind::CouplingDistance;
  if (needs_ref) {
    for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
      CounterRng rng(seed_chain({cfg.master_seed, static_cast<std::uint64_t>(cfg.kind), ti,
                                 detail::kRefPoolTag}));
      ref_pools.push_back(std::make_shared<const ReferencePool>(
          build_pool(law, p0, cfg.t_grid[ti], pool_m, rng)));
    }
  }

  // Grid provider for the coupling function, shared by all cells.
  std::shared_ptr<GridPoolProvider> grid_pools;
  const bool needs_grid_pools = cfg.kind == ExperimentKind::CouplingDistance ||
                                cfg.kind == ExperimentKind::Decoupling ||
                                cfg.kind == ExperimentKind::SupDistance;
  if (needs_grid_pools) {
    grid_pools = std::make_shared<GridPoolProvider>(
        law, p0, pool_m, cfg.ref_time_step,
        seed_chain({cfg.master_seed, static_cast<std::uint64_t>(cfg.kind), detail::kGridPoolTag}),
        cfg.exact_pool);
  }

  const double t_end = cfg.t_grid.back();
  const bool by_n = cfg.kind != ExperimentKind::MomentDecay && cfg.kind != ExperimentKind::Lemma7Audit;
  const std::size_t outer = by_n ? cfg.n_grid.size()
                                 : (cfg.kind == ExperimentKind::MomentDecay ? cfg.t_grid.size() : 1);
  const std::size_t n_cells = outer * cfg.replicas;

  struct CellOutput {
    std::vector<ReportRow> rows;
    std::string states;
    std::string paths;
  };
  std::vector<CellOutput> cells(n_cells);

  auto run_cell = [&](std::size_t c) {
    const std::size_t oi = c / cfg.replicas;
    const std::size_t rep = c % cfg.replicas;
    auto& out = cells[c];
    auto emit = [&](std::size_t n, double t, const std::string& stat, double value,
                    std::optional<double> se, std::uint64_t seed) {
      out.rows.push_back(ReportRow{to_string(cfg.kind), model_hash, n, t,
                                   static_cast<std::int64_t>(rep), stat, value, se, seed});
    };

    switch (cfg.kind) {
      case ExperimentKind::ChaosRate: {
        const std::size_t n = cfg.n_grid[oi];
        const std::uint64_t seed = detail::cell_seed(cfg, n, 0, rep);
        EventStream stream(n, seed);
        const auto snaps = run_bird(law, p0, n, t_end, stream, cfg.t_grid);
        for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
          emit(n, cfg.t_grid[ti], "wpp_emp_ref",
               detail::wpp_vs_pool(snaps[ti].state.states, *ref_pools[ti], cfg.p), std::nullopt, seed);
          if (cfg.dump_states) {
            for (std::size_t pi = 0; pi < snaps[ti].state.states.size(); ++pi)
              out.states += std::to_string(rep) + "," + fmt_g17(cfg.t_grid[ti]) + "," +
                            std::to_string(pi) + "," + fmt_g17(snaps[ti].state.states[pi]) + "\n";
          }
        }
        break;
      }
      case ExperimentKind::CouplingDistance:
      case ExperimentKind::SupDistance: {
        const std::size_t n = cfg.n_grid[oi];
        const std::uint64_t seed = detail::cell_seed(cfg, n, 0, rep);
        EventStream stream(n, seed);
        std::vector<PathPoint> path;
        auto run = run_coupled(law, p0, n, t_end, stream, *grid_pools, cfg.t_grid,
                               cfg.dump_paths ? &path : nullptr);
        for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
          const double t = cfg.t_grid[ti];
          emit(n, t, "sup_x1_u1_pp", run.sup_abs_p[ti], std::nullopt, seed);
          if (cfg.kind == ExperimentKind::CouplingDistance) {
            emit(n, t, "x1_u1_pp", cost_p(run.x_states[ti][0] - run.u_states[ti][0], cfg.p),
                 std::nullopt, seed);
            emit(n, t, "wpp_emp_ref", detail::wpp_vs_pool(run.x_states[ti], *ref_pools[ti], cfg.p),
                 std::nullopt, seed);
          }
        }
        if (cfg.dump_paths)
          for (const auto& pp : path)
            out.paths += std::to_string(rep) + "," + fmt_g17(pp.t) + "," + fmt_g17(pp.x1) + "," +
                         fmt_g17(pp.u1) + "\n";
        break;
      }
      case ExperimentKind::Decoupling: {
        const std::size_t n = cfg.n_grid[oi];
        if (cfg.k > n) throw ConfigError("decoupling: k exceeds N=" + std::to_string(n));
        const std::uint64_t seed = detail::cell_seed(cfg, n, 0, rep);
        EventStream primary(n, seed);
        EventStream copy = primary.fork_independent_copy();
        std::vector<DecoupledPathPoint> path;
        const auto run = run_decoupled(law, p0, n, cfg.k, t_end, primary, copy, *grid_pools,
                                       cfg.t_grid, cfg.dump_paths ? &path : nullptr);
        for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
          double acc = 0.0;
          for (std::size_t i = 0; i < cfg.k; ++i)
            acc += cost_p(run.u_first_k[ti][i] - run.v_first_k[ti][i], cfg.p);
          emit(n, cfg.t_grid[ti], "uv_pp", acc / static_cast<double>(cfg.k), std::nullopt, seed);
        }
        if (cfg.dump_paths)
          for (const auto& pp : path)
            out.paths += std::to_string(rep) + "," + fmt_g17(pp.t) + "," + fmt_g17(pp.x1) + "," +
                         fmt_g17(pp.u1) + "," + fmt_g17(pp.v1) + "\n";
        break;
      }
      case ExperimentKind::NanbuVsBird: {
        const std::size_t n = cfg.n_grid[oi];
        const std::uint64_t seed = detail::cell_seed(cfg, n, 0, rep);
        EventStream bird_stream(n, seed, 0);
        EventStream nanbu_stream(n, seed, 1);
        const auto bird = run_bird(law, p0, n, t_end, bird_stream, cfg.t_grid);
        const auto nanbu = run_nanbu(law, p0, n, t_end, nanbu_stream, cfg.t_grid);
        for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
          const double t = cfg.t_grid[ti];
          emit(n, t, "bird_mp", moment_q(bird[ti].state.states, cfg.p), std::nullopt, seed);
          emit(n, t, "nanbu_mp", moment_q(nanbu[ti].state.states, cfg.p), std::nullopt, seed);
          emit(n, t, "bird_m2", moment_q(bird[ti].state.states, 2.0), std::nullopt, seed);
          emit(n, t, "nanbu_m2", moment_q(nanbu[ti].state.states, 2.0), std::nullopt, seed);
        }
        break;
      }
      case ExperimentKind::MomentDecay: {
        const double t = cfg.t_grid[oi];
        const std::uint64_t seed = detail::cell_seed(cfg, 0, oi, rep);
        CounterRng rng(seed);
        std::vector<double> mp(pool_m), m2(pool_m);
        for (std::size_t s = 0; s < pool_m; ++s) {
          const double x = wild_sample(law, p0, t, rng);
          mp[s] = std::pow(std::abs(x), static_cast<double>(cfg.p));
          m2[s] = x * x;
        }
        const auto msp = mean_se(mp), ms2 = mean_se(m2);
        emit(0, t, "moment_p", msp.mean, msp.se, seed);
        emit(0, t, "moment_2", ms2.mean, ms2.se, seed);
        break;
      }
      case ExperimentKind::Lemma7Audit: {
        const std::uint64_t seed = detail::cell_seed(cfg, 0, 0, rep);
        CounterRng rng(seed);
        const std::size_t m = 2 + rng.next_index(23);
        const std::size_t nn = 1 + rng.next_index(m);
        const double rho = rng.next_uniform(0.0, 0.8);
        const InitialLaw mu = InitialLaw::gaussian(0.0, 1.0);
        auto gen = [m, rho](CounterRng& r) {
          std::vector<double> y(m);
          const double z0 = normal_quantile((static_cast<double>(r.next_u64() >> 11) + 0.5) * 0x1.0p-53);
          for (auto& v : y)
            v = std::sqrt(rho) * z0 +
                std::sqrt(1.0 - rho) *
                    normal_quantile((static_cast<double>(r.next_u64() >> 11) + 0.5) * 0x1.0p-53);
          return y;
        };
        const auto rep7 = lemma7_check(gen, mu, nn, cfg.p, 800, rng);
        emit(m, 0.0, "lemma7_lhs", rep7.lhs, rep7.lhs_se, seed);
        emit(m, 0.0, "lemma7_rhs", rep7.rhs, rep7.rhs_se, seed);
        emit(m, 0.0, "lemma7_holds", rep7.holds ? 1.0 : 0.0, std::nullopt, seed);
        break;
      }
    }
  };

  parallel_for(n_cells, cfg.workers, run_cell);

  ExperimentResult result;
  for (auto& c : cells)
    result.rows.insert(result.rows.end(), std::make_move_iterator(c.rows.begin()),
                       std::make_move_iterator(c.rows.end()));
  sort_rows(result.rows);
  result.csv = render_csv(result.rows);

  result.summary = summarize(result.rows);
  result.summary.model = pre_summary.model;
  result.summary.p0 = pre_summary.p0;
  result.summary.p = cfg.p;
  for (auto& note : notes) result.summary.notes.push_back(note);
  for (std::size_t ti = 0; ti < ref_pools.size(); ++ti)
    result.summary.noise_floor.push_back(
        {cfg.t_grid[ti], detail::pool_noise_floor(*ref_pools[ti], cfg.p, cfg.master_seed)});

  if (cfg.dump_states) {
    result.states_csv = "replica,time,particle_index,state\n";
    for (const auto& c : cells) result.states_csv += c.states;
  }
  if (cfg.dump_paths) {
    result.paths_csv =
        cfg.kind == ExperimentKind::Decoupling ? "replica,time,x1,u1,v1\n" : "replica,time,x1,u1\n";
    for (const auto& c : cells) result.paths_csv += c.paths;
  }

  if (!cfg.out.empty()) {
    std::ofstream os(cfg.out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output file: " + cfg.out);
    os << result.csv;
    std::ofstream js(cfg.out + ".summary.json", std::ios::binary);
    js << summary_to_json(result.summary).dump(2) << "\n";
    if (cfg.dump_states) std::ofstream(cfg.out + ".states.csv", std::ios::binary) << result.states_csv;
    if (cfg.dump_paths) std::ofstream(cfg.out + ".paths.csv", std::ios::binary) << result.paths_csv;
  }
  return result;
}

}  // namespace kaclab
