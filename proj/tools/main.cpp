// Command-line front end: replica-symmetric theory, finite-N simulation, and
// theory-vs-simulation comparison reports for mismatched Bayesian regression.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "rsreg/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNonConvergence = 3;
constexpr int kExitSamplerHealth = 4;

std::string timestamp_line() {
  const std::time_t now = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
  return std::string("# generated ") + buf + "Z\n";
}

struct CommonArgs {
  std::string config_path;
  std::string output_path;
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  bool no_timestamp = false;
  std::optional<std::uint64_t> seed_override;
};

rsreg::ExperimentConfig load(const CommonArgs& args) {
  rsreg::ExperimentConfig cfg = rsreg::ExperimentConfig::from_file(args.config_path);
  if (!args.output_path.empty()) cfg.output.path = args.output_path;
  if (args.seed_override && cfg.sim) {
    cfg.sim->seeds.clear();
    cfg.sim->seeds.push_back(*args.seed_override);
  }
  return cfg;
}

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "JSON experiment config")->required();
  sub->add_option("--output", args.output_path, "output path (overrides config)");
  sub->add_option("--workers", args.workers, "seed-level worker threads");
  sub->add_option("--seed", args.seed_override, "run a single seed instead of the configured list");
  sub->add_flag("--no-timestamp", args.no_timestamp, "omit the timestamp header line");
}

int cmd_solve(const CommonArgs& args) {
  const rsreg::ExperimentConfig cfg = load(args);
  const rsreg::QuadratureGrid grid =
      rsreg::make_grid(cfg.solver.quad_nodes_outer, cfg.solver.quad_nodes_inner);
  const rsreg::SolveReport rep =
      rsreg::solve_fixed_point(cfg.model, grid, cfg.solver.solve_options());
  nlohmann::json j = rsreg::solve_report_to_json(rep);
  j["config"] = cfg.to_json();
  rsreg::write_text(cfg.output, j.dump(2) + "\n");
  return rep.converged ? 0 : kExitNonConvergence;
}

int cmd_free_energy(const CommonArgs& args) {
  const rsreg::ExperimentConfig cfg = load(args);
  const rsreg::QuadratureGrid grid =
      rsreg::make_grid(cfg.solver.quad_nodes_outer, cfg.solver.quad_nodes_inner);
  const rsreg::RegressionPrediction pred =
      rsreg::predict_regression(cfg.model, grid, cfg.solver.solve_options());
  nlohmann::json j;
  j["state"] = rsreg::overlap_state_to_json(pred.report.state);
  j["F"] = pred.free_energy + cfg.model.kappa * cfg.model.gamma;
  j["free_energy"] = pred.free_energy;
  j["Fbar"] = rsreg::free_energy_Fbar(cfg.model, pred.report.state, grid);
  j["mse_per_n"] = pred.mse_per_n;
  j["converged"] = pred.report.converged;
  j["config"] = cfg.to_json();
  rsreg::write_text(cfg.output, j.dump(2) + "\n");
  return pred.report.converged ? 0 : kExitNonConvergence;
}

int cmd_closed_form(const CommonArgs& args) {
  const rsreg::ExperimentConfig cfg = load(args);
  const rsreg::OverlapState s = rsreg::closed_form_quadratic(cfg.model);
  nlohmann::json j = rsreg::overlap_state_to_json(s);
  j["mse_per_n"] = s.q;
  j["config"] = cfg.to_json();
  rsreg::write_text(cfg.output, j.dump(2) + "\n");
  return 0;
}

int cmd_check_potential(const CommonArgs& args) {
  const rsreg::ExperimentConfig cfg = load(args);
  const rsreg::GrowthReport rep = rsreg::check_growth(cfg.model.potential, 10.0, 2001);
  nlohmann::json j;
  j["kind"] = cfg.model.potential.kind_name();
  j["d"] = rep.d;
  j["violations_nonpositive"] = rep.violations_nonpositive;
  j["violations_concave"] = rep.violations_concave;
  j["ok"] = rep.ok();
  rsreg::write_text(cfg.output, j.dump(2) + "\n");
  return 0;
}

int cmd_simulate(const CommonArgs& args) {
  const rsreg::ExperimentConfig cfg = load(args);
  if (!cfg.sim) throw rsreg::ConfigError("sim", "missing sim section");
  const rsreg::SimAggregate agg =
      rsreg::run_simulation(cfg.model, *cfg.sim, args.workers);
  nlohmann::json j;
  j["mse_mean"] = agg.mse_mean;
  j["mse_se"] = agg.mse_se;
  j["fe_mean"] = agg.fe_mean;
  j["fe_se"] = agg.fe_se;
  j["overlaps"] = {{"r11_mean", agg.r11_mean}, {"r11_se", agg.r11_se},
                   {"r12_mean", agg.r12_mean}, {"r12_se", agg.r12_se},
                   {"q11_mean", agg.q11_mean}, {"q11_se", agg.q11_se},
                   {"q12_mean", agg.q12_mean}, {"q12_se", agg.q12_se}};
  j["seeds_used"] = agg.seeds_used;
  j["seeds_requested"] = agg.seeds_requested;
  j["config"] = cfg.to_json();
  rsreg::write_text(cfg.output, j.dump(2) + "\n");
  return agg.seeds_used == agg.seeds_requested ? 0 : kExitSamplerHealth;
}

int cmd_compare(const CommonArgs& args) {
  const rsreg::ExperimentConfig cfg = load(args);
  if (!cfg.sim) throw rsreg::ConfigError("sim", "missing sim section");

  std::vector<rsreg::ComparisonRow> rows;
  bool all_converged = true;
  if (cfg.sweep) {
    for (double v : cfg.sweep->grid) {
      const rsreg::ModelParams model =
          rsreg::apply_sweep_value(cfg.model, cfg.sweep->param_name, v);
      rows.push_back(rsreg::compare_point(model, cfg.solver, *cfg.sim, args.workers,
                                          cfg.sweep->param_name, v));
      all_converged = all_converged && rows.back().solver.converged;
    }
  } else {
    rows.push_back(rsreg::compare_point(cfg.model, cfg.solver, *cfg.sim, args.workers));
    all_converged = rows.back().solver.converged;
  }

  std::ostringstream text;
  if (cfg.output.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back(rsreg::comparison_to_json(r));
    nlohmann::json doc;
    doc["rows"] = j;
    doc["config"] = cfg.to_json();
    text << doc.dump(2) << "\n";
  } else {
    if (!args.no_timestamp) text << timestamp_line();
    text << rsreg::comparison_csv_header() << "\n";
    for (const auto& r : rows) text << rsreg::comparison_csv_row(r) << "\n";
  }
  rsreg::write_text(cfg.output, text.str());

  bool dropped_seeds = false;
  for (const auto& r : rows)
    if (r.sim.seeds_used < r.sim.seeds_requested) dropped_seeds = true;
  if (!all_converged) return kExitNonConvergence;
  return dropped_seeds ? kExitSamplerHealth : 0;
}

int cmd_sweep(const CommonArgs& args) {
  const rsreg::ExperimentConfig cfg = load(args);
  if (!cfg.sweep) throw rsreg::ConfigError("sweep", "missing sweep section");
  const std::vector<rsreg::SweepRow> rows = rsreg::run_sweep(cfg);

  std::ostringstream text;
  if (!args.no_timestamp) text << timestamp_line();
  text << rsreg::sweep_csv_header(cfg.sweep->param_name) << "\n";
  for (const auto& r : rows) text << rsreg::sweep_csv_row(r) << "\n";
  rsreg::write_text(cfg.output, text.str());

  for (const auto& r : rows)
    if (!r.report.converged) return kExitNonConvergence;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replica-symmetric predictions and finite-N Monte Carlo for "
               "mismatched Bayesian linear regression"};
  app.require_subcommand(1);

  CommonArgs args;
  int (*handler)(const CommonArgs&) = nullptr;

  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const CommonArgs&);
  };
  const Sub subs[] = {
      {"solve", "solve the replica-symmetric fixed point", cmd_solve},
      {"free-energy", "fixed point plus limiting free energy", cmd_free_energy},
      {"closed-form", "closed-form overlaps for the quadratic potential", cmd_closed_form},
      {"simulate", "finite-N Monte Carlo simulation", cmd_simulate},
      {"compare", "theory vs simulation comparison report", cmd_compare},
      {"sweep", "theory values over a parameter grid", cmd_sweep},
      {"check-potential", "growth/concavity scan of the configured potential", cmd_check_potential},
  };
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, args);
    sub->callback([&handler, fn = s.fn] { handler = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    return handler(args);
  } catch (const rsreg::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    if (what.find("acceptance rate") != std::string::npos) return kExitSamplerHealth;
    return 1;
  }
}
