#include "isqld/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "isqld/distributions.hpp"
#include "isqld/errors.hpp"
#include "isqld/kernels.hpp"
#include "isqld/parallel.hpp"
#include "isqld/path_solver.hpp"
#include "isqld/rate.hpp"
#include "isqld/simulator.hpp"
#include "isqld/surface_io.hpp"
#include "isqld/verification.hpp"

namespace isqld::cli {

namespace {

using nlohmann::json;

// Collects flags of one subcommand and copies the ones actually given into
// the config object, so that flags override the config file.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  template <class T>
  void add(const std::string& flag, const std::string& key, const std::string& help) {
    auto store = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(flag, *store, help);
    apply_.push_back([opt, store, key](json& cfg) {
      if (opt->count() > 0) cfg[key] = *store;
    });
  }

  /// Flag holding a JSON document (distribution specs).
  void add_json(const std::string& flag, const std::string& key, const std::string& help) {
    auto store = std::make_shared<std::string>();
    CLI::Option* opt = app_->add_option(flag, *store, help);
    apply_.push_back([opt, store, key, flag](json& cfg) {
      if (opt->count() == 0) return;
      try {
        cfg[key] = json::parse(*store);
      } catch (const json::exception& e) {
        throw ConfigError(flag + " is not valid JSON: " + e.what());
      }
    });
  }

  void add_switch(const std::string& flag, const std::string& key, const std::string& help) {
    auto store = std::make_shared<bool>(false);
    CLI::Option* opt = app_->add_flag(flag, *store, help);
    apply_.push_back([opt, store, key](json& cfg) {
      if (opt->count() > 0) cfg[key] = *store;
    });
  }

  void apply(json& cfg) const {
    for (const auto& f : apply_) f(cfg);
  }

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::function<void(json&)>> apply_;
};

template <class T>
T get(const json& cfg, const std::string& key, const T& fallback) {
  if (!cfg.contains(key) || cfg[key].is_null()) return fallback;
  try {
    return cfg[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

template <class T>
T require(const json& cfg, const std::string& key) {
  if (!cfg.contains(key)) throw ConfigError("missing required setting '" + key + "'");
  return get<T>(cfg, key, T{});
}

double positive(const json& cfg, const std::string& key, double fallback) {
  const double v = get<double>(cfg, key, fallback);
  if (!(v > 0.0)) throw ConfigError("'" + key + "' must be positive");
  return v;
}

double non_negative(const json& cfg, const std::string& key, double fallback) {
  const double v = get<double>(cfg, key, fallback);
  if (!(v >= 0.0)) throw ConfigError("'" + key + "' must be non-negative");
  return v;
}

std::size_t count(const json& cfg, const std::string& key, std::size_t fallback) {
  const auto v = get<long long>(cfg, key, static_cast<long long>(fallback));
  if (v < 1) throw ConfigError("'" + key + "' must be at least 1");
  return static_cast<std::size_t>(v);
}

ServiceLaw service_from(const json& cfg) {
  if (!cfg.contains("service")) return ServiceLaw::uniform(0.0, 1.0);
  return ServiceLaw::from_json(cfg["service"]);
}

RenewalLaw arrivals_from(const json& cfg) {
  if (!cfg.contains("arrivals")) return RenewalLaw::exponential(1.0);
  return RenewalLaw::from_json(cfg["arrivals"]);
}

std::filesystem::path out_dir(const json& cfg) {
  std::string dir = get<std::string>(cfg, "out_dir", "");
  if (dir.empty()) {
    if (const char* env = std::getenv("ISQLD_OUTPUT_DIR")) dir = env;
  }
  if (dir.empty()) dir = ".";
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

void write_json(const std::filesystem::path& path, const json& j) {
  io::save_text(path.string(), j.dump(2) + "\n");
}

// ---- commands ---------------------------------------------------------------

int cmd_psi(const json& cfg, std::ostream& out) {
  RenewalLaw law = RenewalLaw::exponential(1.0);
  if (cfg.contains("arrivals")) {
    law = RenewalLaw::from_json(cfg["arrivals"]);
  } else if (cfg.contains("kind")) {
    json spec{{"kind", cfg["kind"]}};
    for (const char* k : {"rate", "shape", "low", "high", "value"}) {
      if (cfg.contains(k)) spec[k] = cfg[k];
    }
    if (!spec.contains("rate") && (spec["kind"] == "exponential" || spec["kind"] == "gamma")) {
      spec["rate"] = 1.0;
    }
    law = RenewalLaw::from_json(spec);
  }
  auto thetas = get<std::vector<double>>(cfg, "theta", {});
  if (thetas.empty()) throw ConfigError("psi needs at least one --theta");
  const int precision = static_cast<int>(get<long long>(cfg, "precision", 6));
  if (precision < 0 || precision > 17) throw ConfigError("'precision' must be in [0, 17]");
  const bool derivative = get<bool>(cfg, "derivative", false);
  const kernels::PsiEvaluator ev(law);
  std::optional<double> K;
  if (cfg.contains("K")) K = positive(cfg, "K", 1.0);
  const ServiceLaw svc = service_from(cfg);

  out << std::fixed << std::setprecision(precision);
  for (double th : thetas) {
    double v = 0.0;
    if (K) {
      v = kernels::psi_n_truncated(ev, svc, *K, th);
    } else {
      v = derivative ? ev.derivative(th) : ev(th);
    }
    out << v << '\n';
  }
  return kExitOk;
}

int cmd_simulate(const json& cfg, std::ostream& out) {
  const auto arr = arrivals_from(cfg);
  const auto svc = service_from(cfg);
  const double lambda = positive(cfg, "lambda", 100.0);
  const double T = non_negative(cfg, "T", 1.0);
  const auto seed = get<std::uint64_t>(cfg, "seed", 1);
  const auto rep = get<std::uint64_t>(cfg, "replication", 0);
  const auto log = sim::simulate(arr, svc, lambda, T, seed, rep);
  const auto dir = out_dir(cfg);
  std::ostringstream csv;
  io::write_events_csv(csv, log);
  io::save_text((dir / "events.csv").string(), csv.str());
  json summary{{"arrivals", log.size()},
               {"max_in_system", sim::max_in_system(log)},
               {"lambda", lambda},
               {"T", T},
               {"seed", seed},
               {"replication", rep}};
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_surface(const json& cfg, std::ostream& out) {
  const auto arr = arrivals_from(cfg);
  const auto svc = service_from(cfg);
  const double lambda = positive(cfg, "lambda", 100.0);
  const double T = positive(cfg, "T", 1.0);
  const auto seed = get<std::uint64_t>(cfg, "seed", 1);
  const auto rep = get<std::uint64_t>(cfg, "replication", 0);
  const auto grid = sim::default_grid(T, svc, count(cfg, "nt", 32), count(cfg, "ny", 64));
  const auto log = sim::simulate(arr, svc, lambda, T, seed, rep);
  auto surf = sim::build_surface(log, grid);
  if (get<bool>(cfg, "scaled", false)) surf = surf.to_scaled();
  const auto dir = out_dir(cfg);
  io::save_surface_csv((dir / "surface.csv").string(), surf);
  write_json(dir / "surface.json", io::surface_to_json(surf));
  io::save_surface_csv((dir / "residual.csv").string(), sim::residual_view(surf));
  json summary{{"arrivals", log.size()},
               {"t_nodes", grid.t_nodes().size()},
               {"y_nodes", grid.y_nodes().size()},
               {"y_max", grid.y_max()},
               {"scaled", surf.scaled}};
  out << summary.dump(2) << '\n';
  return kExitOk;
}

// Every k-th node of `nodes`, k = (nodes - 1) / cells.
std::vector<double> coarsen(const std::vector<double>& nodes, std::size_t cells, const char* what) {
  const std::size_t intervals = nodes.size() - 1;
  if (cells == 0 || intervals % cells != 0) {
    throw ConfigError(std::string(what) + " cells must divide the " + std::to_string(intervals) +
                      " grid intervals");
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < nodes.size(); k += intervals / cells) out.push_back(nodes[k]);
  return out;
}

int cmd_rate(const json& cfg, std::ostream& out) {
  const auto path = require<std::string>(cfg, "surface");
  auto surf = io::load_surface_csv(path, !cfg.contains("lambda"));
  if (cfg.contains("lambda")) {
    surf.lambda = positive(cfg, "lambda", 1.0);
    surf = surf.to_scaled();
  }
  const auto arr = arrivals_from(cfg);
  const auto svc = service_from(cfg);
  const auto& ts = surf.grid.t_nodes();
  const auto& ys = surf.grid.y_nodes();
  rate::Partition part{coarsen(ts, count(cfg, "t_cells", ts.size() - 1), "t"),
                       coarsen(ys, count(cfg, "y_cells", ys.size() - 1), "y")};
  const auto table = rate::increments_from_surface(surf, part);
  const kernels::PsiEvaluator ev(arr);
  const auto res = rate::finite_dim_rate(table, ev, svc);
  json j = res.to_json();
  j["t_cells"] = part.t.size() - 1;
  j["y_cells"] = part.y.size() - 1;  // finite cells, as in --y-cells
  write_json(out_dir(cfg) / "rate.json", j);
  out << j.dump(2) << '\n';
  return kExitOk;
}

std::string sweep_csv(const std::vector<paths::HorizonPoint>& sweep) {
  std::ostringstream os;
  os << "u,mu,rate,feasible\n";
  for (const auto& p : sweep) {
    os << io::format_double(p.u) << ',' << (p.feasible ? io::format_double(p.mu) : "") << ','
       << (p.feasible ? io::format_double(p.rate) : "") << ',' << (p.feasible ? 1 : 0) << '\n';
  }
  return os.str();
}

void write_solution(const std::filesystem::path& dir, const std::string& stem,
                    const paths::OptimalPath& sol) {
  io::save_surface_csv((dir / (stem + "_qbar.csv")).string(), sol.surface_qbar);
  io::save_surface_csv((dir / (stem + "_q.csv")).string(), sol.surface_q);
  io::save_text((dir / (stem + "_sweep.csv")).string(), sweep_csv(sol.sweep));
  write_json(dir / (stem + "_summary.json"), sol.summary());
}

paths::SurfaceOptions surface_options(const json& cfg) {
  return paths::SurfaceOptions{count(cfg, "nt", 32), count(cfg, "ny", 32)};
}

int cmd_overflow(const json& cfg, std::ostream& out) {
  const paths::OverflowProblem p{service_from(cfg), positive(cfg, "x", 2.0), positive(cfg, "T", 1.0),
                                 count(cfg, "u_points", 64)};
  const auto sol = paths::solve_overflow(p, surface_options(cfg));
  write_solution(out_dir(cfg), "overflow", sol);
  out << sol.summary().dump(2) << '\n';
  return kExitOk;
}

paths::RuinProblem ruin_problem(const json& cfg) {
  const auto [h1, h2] = paths::whole_life_payoffs(non_negative(cfg, "b", 1.5),
                                                  non_negative(cfg, "p", 1.0),
                                                  non_negative(cfg, "delta", 0.0));
  const double T = positive(cfg, "T", 1.0);
  const std::size_t n = count(cfg, "u_points", 64);
  std::vector<double> grid(n);
  for (std::size_t k = 0; k < n; ++k) grid[k] = T * static_cast<double>(k + 1) / static_cast<double>(n);
  return paths::RuinProblem{service_from(cfg), h1, h2, positive(cfg, "x", 10.0), T, grid};
}

int cmd_ruin(const json& cfg, std::ostream& out) {
  const auto rp = ruin_problem(cfg);
  const auto sol = paths::solve_ruin(rp, surface_options(cfg));
  write_solution(out_dir(cfg), "ruin", sol);
  out << sol.summary().dump(2) << '\n';
  return kExitOk;
}

int cmd_verify(const json& cfg, std::ostream& out) {
  const auto check = get<std::string>(cfg, "check", "decay");
  const auto dir = out_dir(cfg);
  const auto seed = get<std::uint64_t>(cfg, "seed", 1);
  json report;
  if (check == "tail") {
    const auto n = get<std::uint64_t>(cfg, "n", 0);
    report = {{"m", positive(cfg, "m", 1.0)},
              {"n", n},
              {"log_prob", verify::poisson_tail_log(positive(cfg, "m", 1.0), n)}};
  } else if (check == "decay") {
    const verify::QueueLengthEvent ev{service_from(cfg), positive(cfg, "u", 1.0),
                                      positive(cfg, "level", 2.0)};
    const auto lambdas =
        get<std::vector<double>>(cfg, "lambdas", {100.0, 200.0, 400.0, 800.0, 1600.0});
    const auto method = get<std::string>(cfg, "method", "exact");
    verify::DecayEstimate est;
    if (method == "exact") {
      est = verify::decay_curve_exact(ev, lambdas);
    } else if (method == "mc") {
      est = verify::decay_curve_mc(ev, lambdas, count(cfg, "reps", 10000), seed);
    } else {
      throw ConfigError("'method' must be exact or mc");
    }
    io::save_text((dir / "decay.csv").string(), est.to_csv());
    report = est.to_json();
  } else if (check == "marginal") {
    report = verify::marginal_distribution_check(arrivals_from(cfg), service_from(cfg),
                                                 positive(cfg, "lambda", 50.0),
                                                 non_negative(cfg, "u", 1.0),
                                                 count(cfg, "reps", 2000), seed)
                 .to_json();
  } else if (check == "coupling") {
    const auto svc = service_from(cfg);
    const double T = positive(cfg, "T", 1.0);
    const auto grid = sim::default_grid(T, svc, count(cfg, "nt", 32), count(cfg, "ny", 64));
    report = verify::truncation_coupling_check(arrivals_from(cfg), svc, positive(cfg, "lambda", 50.0),
                                               T, positive(cfg, "K", 0.5), count(cfg, "reps", 200),
                                               seed, grid)
                 .to_json();
  } else if (check == "cross") {
    const paths::OverflowProblem p{service_from(cfg), positive(cfg, "x", 2.0),
                                   positive(cfg, "T", 1.0), count(cfg, "u_points", 64)};
    const auto sol = paths::solve_overflow(p, {2, 2});
    const double y_max = p.T + paths::service_reach(p.svc);
    std::vector<rate::Partition> parts;
    for (long long k : get<std::vector<long long>>(cfg, "partitions", {2, 4, 8, 16})) {
      if (k < 1) throw ConfigError("partition sizes must be positive");
      const auto ny = static_cast<std::size_t>(std::llround(static_cast<double>(k) * y_max / p.T));
      parts.push_back(rate::Partition::uniform(p.T, static_cast<std::size_t>(k), y_max,
                                               std::max<std::size_t>(1, ny)));
    }
    report = verify::rate_cross_check(sol.tilt, p.svc, p.T, parts).to_json();
  } else {
    throw ConfigError("unknown check '" + check + "'");
  }
  report["check"] = check;
  write_json(dir / ("verify_" + check + ".json"), report);
  out << report.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Infinite-server queue surfaces, rate functionals and most likely paths", "isqld"};
  app.require_subcommand(1, 1);
  std::string config_path;
  unsigned threads = 0;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--threads", threads, "cap on worker threads (0 = all cores)");
  app.fallthrough();

  std::vector<std::pair<std::string, FlagSet>> commands;
  auto common = [](FlagSet& f) {
    f.add<std::string>("--out", "out_dir", "output directory");
  };
  auto laws = [](FlagSet& f) {
    f.add_json("--service", "service", "service law as JSON");
    f.add_json("--arrivals", "arrivals", "interarrival law as JSON");
  };
  auto sim_flags = [](FlagSet& f) {
    f.add<double>("--lambda", "lambda", "speed-up factor");
    f.add<double>("-T,--horizon", "T", "horizon");
    f.add<std::uint64_t>("--seed", "seed", "random seed");
  };

  {
    FlagSet f(app.add_subcommand("psi", "evaluate psi(theta) = -kappa^{-1}(-theta)"));
    f.add<std::string>("--kind", "kind", "interarrival family");
    f.add<double>("--rate", "rate", "rate parameter");
    f.add<double>("--shape", "shape", "gamma shape");
    f.add<double>("--low", "low", "uniform lower end");
    f.add<double>("--high", "high", "uniform upper end");
    f.add<double>("--value", "value", "deterministic gap");
    f.add<std::vector<double>>("--theta", "theta", "argument(s)");
    f.add<double>("--K", "K", "truncation level (uses --service)");
    f.add<long long>("--precision", "precision", "decimals printed (default 6)");
    f.add_switch("--derivative", "derivative", "print psi'(theta) instead");
    laws(f);
    commands.emplace_back("psi", std::move(f));
  }
  {
    FlagSet f(app.add_subcommand("simulate", "simulate one event log"));
    common(f);
    laws(f);
    sim_flags(f);
    f.add<std::uint64_t>("--replication", "replication", "replication index");
    commands.emplace_back("simulate", std::move(f));
  }
  {
    FlagSet f(app.add_subcommand("surface", "simulate and write the occupancy surface"));
    common(f);
    laws(f);
    sim_flags(f);
    f.add<std::uint64_t>("--replication", "replication", "replication index");
    f.add<long long>("--nt", "nt", "t intervals");
    f.add<long long>("--ny", "ny", "y intervals");
    f.add_switch("--scaled", "scaled", "divide counts by lambda");
    commands.emplace_back("surface", std::move(f));
  }
  {
    FlagSet f(app.add_subcommand("rate", "finite-dimensional rate of a surface CSV"));
    common(f);
    laws(f);
    f.add<std::string>("--surface", "surface", "surface CSV");
    f.add<double>("--lambda", "lambda", "divide counts by lambda");
    f.add<long long>("--t-cells", "t_cells", "partition cells in t");
    f.add<long long>("--y-cells", "y_cells", "finite partition cells in y");
    commands.emplace_back("rate", std::move(f));
  }
  {
    FlagSet f(app.add_subcommand("overflow", "most likely path to overflow"));
    common(f);
    laws(f);
    f.add<double>("-x,--level", "x", "overflow level");
    f.add<double>("-T,--horizon", "T", "horizon");
    f.add<long long>("--u-points", "u_points", "candidate horizons");
    f.add<long long>("--nt", "nt", "surface t intervals");
    f.add<long long>("--ny", "ny", "surface y intervals");
    commands.emplace_back("overflow", std::move(f));
  }
  {
    FlagSet f(app.add_subcommand("ruin", "most likely path to ruin (whole-life portfolio)"));
    common(f);
    laws(f);
    f.add<double>("-x,--level", "x", "ruin level");
    f.add<double>("-T,--horizon", "T", "horizon");
    f.add<double>("--b", "b", "death benefit");
    f.add<double>("--p", "p", "premium rate");
    f.add<double>("--delta", "delta", "force of interest");
    f.add<long long>("--u-points", "u_points", "candidate horizons");
    f.add<long long>("--nt", "nt", "surface t intervals");
    f.add<long long>("--ny", "ny", "surface y intervals");
    commands.emplace_back("ruin", std::move(f));
  }
  {
    FlagSet f(app.add_subcommand("verify", "oracles and Monte Carlo checks"));
    common(f);
    laws(f);
    f.add<std::string>("--check", "check", "tail | decay | marginal | coupling | cross");
    f.add<std::string>("--method", "method", "exact | mc (decay)");
    f.add<std::vector<double>>("--lambdas", "lambdas", "lambda values (decay)");
    f.add<double>("--lambda", "lambda", "lambda (marginal, coupling)");
    f.add<double>("-u", "u", "time of the marginal");
    f.add<double>("--level", "level", "event level (decay)");
    f.add<double>("-x", "x", "overflow level (cross)");
    f.add<double>("-T,--horizon", "T", "horizon");
    f.add<double>("--K", "K", "truncation level (coupling)");
    f.add<double>("-m", "m", "Poisson mean (tail)");
    f.add<std::uint64_t>("-n", "n", "level (tail)");
    f.add<long long>("--reps", "reps", "replications");
    f.add<std::uint64_t>("--seed", "seed", "random seed");
    f.add<std::vector<long long>>("--partitions", "partitions", "partition sizes (cross)");
    commands.emplace_back("verify", std::move(f));
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    set_max_threads(threads);
    json cfg = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      try {
        cfg = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
      }
      if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
    }
    for (auto& [name, flags] : commands) {
      if (!flags.app()->parsed()) continue;
      flags.apply(cfg);
      if (name == "psi") return cmd_psi(cfg, out);
      if (name == "simulate") return cmd_simulate(cfg, out);
      if (name == "surface") return cmd_surface(cfg, out);
      if (name == "rate") return cmd_rate(cfg, out);
      if (name == "overflow") return cmd_overflow(cfg, out);
      if (name == "ruin") return cmd_ruin(cfg, out);
      if (name == "verify") return cmd_verify(cfg, out);
    }
    throw ConfigError("no command given");
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace isqld::cli
