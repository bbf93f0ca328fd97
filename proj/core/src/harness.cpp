#include "rsreg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace rsreg {

namespace {

using nlohmann::json;

double get_number(const json& j, const std::string& path, const std::string& key,
                  double fallback, bool required = false) {
  if (!j.contains(key)) {
    if (required) throw ConfigError(path + "." + key, "missing required field");
    return fallback;
  }
  if (!j.at(key).is_number())
    throw ConfigError(path + "." + key, "expected a number");
  return j.at(key).get<double>();
}

Potential potential_from_json(const json& j, const std::string& path) {
  if (!j.contains("kind")) throw ConfigError(path + ".kind", "missing required field");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "quadratic")
    return Potential::quadratic(get_number(j, path, "delta", 1.0, true));
  if (kind == "pseudo_huber")
    return Potential::pseudo_huber(get_number(j, path, "b", 1.0, true));
  if (kind == "zero") return Potential::zero();
  throw ConfigError(path + ".kind", "unknown potential kind '" + kind + "'");
}

json potential_to_json(const Potential& p) {
  json j;
  j["kind"] = p.kind_name();
  if (p.is_quadratic()) j["delta"] = p.delta();
  if (p.kind() == PotentialKind::PseudoHuber) j["b"] = p.param();
  return j;
}

struct SeedResult {
  bool ok = false;
  double mse = 0.0;
  double fe = std::numeric_limits<double>::quiet_NaN();
  double r11 = 0.0, r12 = 0.0, q11 = 0.0, q12 = 0.0;
};

SeedResult run_one_seed(const ModelParams& model, const SimSettings& sim,
                        std::uint64_t seed) {
  SeedResult res;
  const SimulationInstance inst =
      generate_instance(model, sim.n, seed, sim.x_star_mode);
  const bool gaussian =
      model.potential.is_quadratic() || model.potential.is_zero();

  if (sim.sampler_kind == "exact_gaussian" || (sim.sampler_kind.empty() && gaussian)) {
    if (!gaussian)
      throw ConfigError("sim.sampler.kind", "exact_gaussian requires a quadratic potential");
    const GaussianPosterior post =
        factor_posterior(inst, model.potential, model.kappa);
    const PosteriorSummary summary =
        exact_posterior(inst, model.potential, model.kappa);
    res.mse = summary.mse_per_n;
    res.fe = summary.free_energy;
    const auto replicas =
        draw_exact_replicas(post, sim.n_replicas, sim.n_samples, seed);
    const OverlapEstimates est =
        estimate_overlaps(inst, replicas, model.potential, true);
    res.r11 = est.r11;
    res.r12 = est.r12;
    res.q11 = est.q11;
    res.q12 = est.q12;
    res.ok = true;
    return res;
  }

  // MALA path; free energy has no cheap estimator here and stays NaN.
  MalaResult mala =
      mala_sample(inst, model.potential, model.kappa, sim.sampler, sim.n_replicas, seed);
  if (sim.sample_dump_path && !mala.samples.empty())
    dump_samples(*sim.sample_dump_path + ".seed" + std::to_string(seed), mala.samples[0]);
  Eigen::VectorXd x_hat = Eigen::VectorXd::Zero(inst.n);
  long count = 0;
  for (const auto& chain : mala.samples) {
    x_hat += chain.colwise().sum().transpose();
    count += chain.rows();
  }
  x_hat /= static_cast<double>(count);
  res.mse = (x_hat - inst.x_star).squaredNorm() / inst.n;
  const OverlapEstimates est =
      estimate_overlaps(inst, mala.samples, model.potential, true);
  res.r11 = est.r11;
  res.r12 = est.r12;
  res.q11 = est.q11;
  res.q12 = est.q12;
  res.ok = true;
  return res;
}

void mean_se(const std::vector<double>& v, double& mean, double& se) {
  const int t = static_cast<int>(v.size());
  if (t == 0) {
    mean = se = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= t;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var = t > 1 ? var / (t - 1) : 0.0;
  se = std::sqrt(var / t);
}

double z_score(double sim_mean, double sim_se, double theory) {
  if (!(sim_se > 0.0)) return 0.0;
  return (sim_mean - theory) / sim_se;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  if (!j.contains("model")) throw ConfigError("model", "missing required section");
  const json& jm = j.at("model");
  const Potential pot = jm.contains("potential")
                            ? potential_from_json(jm.at("potential"), "model.potential")
                            : Potential::zero();
  const double alpha = get_number(jm, "model", "alpha", 1.0, true);
  const double delta_star = get_number(jm, "model", "delta_star", 1.0);
  const double kappa = get_number(jm, "model", "kappa", 0.5, true);
  double gamma = get_number(jm, "model", "gamma", 0.0);
  try {
    cfg.model = ModelParams::regression(alpha, delta_star, kappa, gamma, pot);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model", e.what());
  }
  if (jm.contains("h")) {
    const double h = jm.at("h").get<double>();
    if (jm.contains("gamma") &&
        std::abs(h - 2.0 * kappa * std::sqrt(gamma)) > 1e-12)
      throw ConfigError("model.h", "h and gamma are both set but h != 2*kappa*sqrt(gamma)");
    cfg.model.h = h;
    if (!jm.contains("gamma")) cfg.model.gamma = h * h / (4.0 * kappa * kappa);
  }

  if (j.contains("solver")) {
    const json& js = j.at("solver");
    cfg.solver.damping = get_number(js, "solver", "damping", cfg.solver.damping);
    cfg.solver.tol = get_number(js, "solver", "tol", cfg.solver.tol);
    cfg.solver.max_iter = static_cast<int>(get_number(js, "solver", "max_iter", cfg.solver.max_iter));
    cfg.solver.n_starts = static_cast<int>(get_number(js, "solver", "n_starts", cfg.solver.n_starts));
    cfg.solver.quad_nodes_outer =
        static_cast<int>(get_number(js, "solver", "quad_nodes_outer", cfg.solver.quad_nodes_outer));
    cfg.solver.quad_nodes_inner =
        static_cast<int>(get_number(js, "solver", "quad_nodes_inner", cfg.solver.quad_nodes_inner));
  }

  if (j.contains("sim")) {
    const json& js = j.at("sim");
    SimSettings sim;
    sim.n = static_cast<int>(get_number(js, "sim", "n", sim.n));
    if (js.contains("seeds")) {
      if (!js.at("seeds").is_array()) throw ConfigError("sim.seeds", "expected an array");
      for (const auto& s : js.at("seeds")) sim.seeds.push_back(s.get<std::uint64_t>());
    } else {
      const int n_seeds = static_cast<int>(get_number(js, "sim", "n_seeds", 8));
      const auto base = static_cast<std::uint64_t>(get_number(js, "sim", "seed_base", 1));
      for (int i = 0; i < n_seeds; ++i) sim.seeds.push_back(base + i);
    }
    if (sim.seeds.empty()) throw ConfigError("sim.seeds", "no seeds given");
    if (js.contains("x_star_mode")) {
      const std::string mode = js.at("x_star_mode").get<std::string>();
      if (mode == "deterministic_norm")
        sim.x_star_mode = XStarMode::DeterministicNorm;
      else if (mode == "gaussian")
        sim.x_star_mode = XStarMode::Gaussian;
      else
        throw ConfigError("sim.x_star_mode", "unknown mode '" + mode + "'");
    }
    if (js.contains("sampler")) {
      const json& jp = js.at("sampler");
      if (jp.contains("kind")) sim.sampler_kind = jp.at("kind").get<std::string>();
      if (sim.sampler_kind != "exact_gaussian" && sim.sampler_kind != "mala")
        throw ConfigError("sim.sampler.kind", "expected 'exact_gaussian' or 'mala'");
      sim.sampler.step = get_number(jp, "sim.sampler", "step", sim.sampler.step);
      sim.sampler.burn_in = static_cast<int>(get_number(jp, "sim.sampler", "burn_in", sim.sampler.burn_in));
      sim.sampler.samples = static_cast<int>(get_number(jp, "sim.sampler", "samples", sim.sampler.samples));
      sim.sampler.thin = static_cast<int>(get_number(jp, "sim.sampler", "thin", sim.sampler.thin));
      sim.sampler.target_accept =
          get_number(jp, "sim.sampler", "target_accept", sim.sampler.target_accept);
    }
    sim.n_replicas = static_cast<int>(get_number(js, "sim", "n_replicas", sim.n_replicas));
    sim.n_samples = static_cast<int>(get_number(js, "sim", "n_samples", sim.n_samples));
    if (js.contains("sample_dump_path"))
      sim.sample_dump_path = js.at("sample_dump_path").get<std::string>();
    cfg.sim = sim;
  }

  if (j.contains("sweep")) {
    const json& js = j.at("sweep");
    SweepSettings sweep;
    if (!js.contains("param_name")) throw ConfigError("sweep.param_name", "missing required field");
    sweep.param_name = js.at("param_name").get<std::string>();
    static const char* kSweepable[] = {"alpha", "delta_star", "delta", "kappa", "gamma", "beta"};
    if (std::find_if(std::begin(kSweepable), std::end(kSweepable),
                     [&](const char* s) { return sweep.param_name == s; }) ==
        std::end(kSweepable))
      throw ConfigError("sweep.param_name", "'" + sweep.param_name + "' is not sweepable");
    if (!js.contains("grid") || !js.at("grid").is_array() || js.at("grid").empty())
      throw ConfigError("sweep.grid", "expected a non-empty array");
    for (const auto& v : js.at("grid")) sweep.grid.push_back(v.get<double>());
    cfg.sweep = sweep;
  }

  if (j.contains("output")) {
    const json& jo = j.at("output");
    if (jo.contains("format")) cfg.output.format = jo.at("format").get<std::string>();
    if (cfg.output.format != "csv" && cfg.output.format != "json")
      throw ConfigError("output.format", "expected 'csv' or 'json'");
    if (jo.contains("path")) cfg.output.path = jo.at("path").get<std::string>();
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("JSON parse failure: ") + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  j["model"] = {{"alpha", model.alpha},
                {"delta_star", model.delta_star},
                {"kappa", model.kappa},
                {"gamma", model.gamma},
                {"h", model.h},
                {"potential", potential_to_json(model.potential)}};
  j["solver"] = {{"damping", solver.damping},
                 {"tol", solver.tol},
                 {"max_iter", solver.max_iter},
                 {"n_starts", solver.n_starts},
                 {"quad_nodes_outer", solver.quad_nodes_outer},
                 {"quad_nodes_inner", solver.quad_nodes_inner}};
  if (sim) {
    j["sim"] = {{"n", sim->n},
                {"seeds", sim->seeds},
                {"x_star_mode", sim->x_star_mode == XStarMode::Gaussian
                                    ? "gaussian"
                                    : "deterministic_norm"},
                {"sampler",
                 {{"kind", sim->sampler_kind},
                  {"step", sim->sampler.step},
                  {"burn_in", sim->sampler.burn_in},
                  {"samples", sim->sampler.samples},
                  {"thin", sim->sampler.thin},
                  {"target_accept", sim->sampler.target_accept}}},
                {"n_replicas", sim->n_replicas},
                {"n_samples", sim->n_samples}};
  }
  if (sweep) j["sweep"] = {{"param_name", sweep->param_name}, {"grid", sweep->grid}};
  j["output"] = {{"format", output.format}, {"path", output.path}};
  return j;
}

ModelParams apply_sweep_value(const ModelParams& base, const std::string& name,
                              double value) {
  if (name == "beta") return beta_reparametrize(base, value);
  ModelParams out = base;
  if (name == "alpha")
    out.alpha = value;
  else if (name == "delta_star")
    out.delta_star = value;
  else if (name == "delta")
    out.potential = Potential::quadratic(value);
  else if (name == "kappa")
    out.kappa = value;
  else if (name == "gamma")
    out.gamma = value;
  else
    throw std::invalid_argument("apply_sweep_value: unknown parameter '" + name + "'");
  // keep the regression-side link h = 2*kappa*sqrt(gamma)
  out.h = 2.0 * out.kappa * std::sqrt(out.gamma);
  return out;
}

SimAggregate run_simulation(const ModelParams& model, const SimSettings& sim,
                            int workers) {
  const int n_seeds = static_cast<int>(sim.seeds.size());
  std::vector<SeedResult> results(n_seeds);
  std::vector<std::string> failures;
  std::mutex mu;

  workers = std::max(1, std::min(workers, n_seeds));
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n_seeds; i = next.fetch_add(1)) {
        try {
          results[i] = run_one_seed(model, sim, sim.seeds[i]);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(mu);
          failures.push_back("seed " + std::to_string(sim.seeds[i]) + ": " + e.what());
        }
      }
    });
  for (auto& t : pool) t.join();

  for (const auto& f : failures) std::cerr << "warning: " << f << "\n";

  std::vector<double> mses, fes, r11s, r12s, q11s, q12s;
  for (const auto& r : results) {
    if (!r.ok) continue;
    mses.push_back(r.mse);
    if (std::isfinite(r.fe)) fes.push_back(r.fe);
    r11s.push_back(r.r11);
    r12s.push_back(r.r12);
    q11s.push_back(r.q11);
    q12s.push_back(r.q12);
  }

  SimAggregate agg;
  agg.seeds_requested = n_seeds;
  agg.seeds_used = static_cast<int>(mses.size());
  if (agg.seeds_used == 0) throw std::runtime_error("run_simulation: every seed failed");
  mean_se(mses, agg.mse_mean, agg.mse_se);
  mean_se(fes, agg.fe_mean, agg.fe_se);
  mean_se(r11s, agg.r11_mean, agg.r11_se);
  mean_se(r12s, agg.r12_mean, agg.r12_se);
  mean_se(q11s, agg.q11_mean, agg.q11_se);
  mean_se(q12s, agg.q12_mean, agg.q12_se);
  return agg;
}

ComparisonRow compare_point(const ModelParams& model, const SolverSettings& solver,
                            const SimSettings& sim, int workers,
                            const std::string& param_name, double param_value) {
  ComparisonRow row;
  row.param_name = param_name;
  row.param_value = param_value;

  const QuadratureGrid grid =
      make_grid(solver.quad_nodes_outer, solver.quad_nodes_inner);
  row.solver = solve_fixed_point(model, grid, solver.solve_options());
  row.theory = row.solver.state;
  row.theory_F = free_energy_F(model, row.theory.q, row.theory.rho, grid);
  row.theory_free_energy = -model.kappa * model.gamma + row.theory_F;

  row.sim = run_simulation(model, sim, workers);
  row.z_mse = z_score(row.sim.mse_mean, row.sim.mse_se, row.theory.q);
  row.z_fe = std::isfinite(row.sim.fe_mean)
                 ? z_score(row.sim.fe_mean, row.sim.fe_se, row.theory_free_energy)
                 : 0.0;
  row.z_r11 = z_score(row.sim.r11_mean, row.sim.r11_se, row.theory.rho);
  row.z_r12 = z_score(row.sim.r12_mean, row.sim.r12_se, row.theory.q);
  row.z_q11 = z_score(row.sim.q11_mean, row.sim.q11_se, row.theory.rbar);
  row.z_q12 = z_score(row.sim.q12_mean, row.sim.q12_se, row.theory.r);
  for (double z : {row.z_mse, row.z_fe, row.z_r11, row.z_r12, row.z_q11, row.z_q12})
    if (std::abs(z) > 3.0) row.flagged = true;
  return row;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string comparison_csv_header() {
  return "param_name,param_value,"
         "theory_q,theory_rho,theory_r,theory_rbar,theory_F,theory_free_energy,"
         "sim_mse_mean,sim_mse_se,z_mse,"
         "sim_fe_mean,sim_fe_se,z_fe,"
         "sim_r11_mean,sim_r11_se,z_r11,"
         "sim_r12_mean,sim_r12_se,z_r12,"
         "sim_q11_mean,sim_q11_se,z_q11,"
         "sim_q12_mean,sim_q12_se,z_q12,"
         "solver_iterations,solver_residual,multistart_spread,clamp_events,"
         "converged,seeds_used,seeds_requested,flagged";
}

std::string comparison_csv_row(const ComparisonRow& r) {
  std::ostringstream out;
  out << r.param_name << ',' << format_double(r.param_value) << ','
      << format_double(r.theory.q) << ',' << format_double(r.theory.rho) << ','
      << format_double(r.theory.r) << ',' << format_double(r.theory.rbar) << ','
      << format_double(r.theory_F) << ',' << format_double(r.theory_free_energy) << ','
      << format_double(r.sim.mse_mean) << ',' << format_double(r.sim.mse_se) << ','
      << format_double(r.z_mse) << ','
      << format_double(r.sim.fe_mean) << ',' << format_double(r.sim.fe_se) << ','
      << format_double(r.z_fe) << ','
      << format_double(r.sim.r11_mean) << ',' << format_double(r.sim.r11_se) << ','
      << format_double(r.z_r11) << ','
      << format_double(r.sim.r12_mean) << ',' << format_double(r.sim.r12_se) << ','
      << format_double(r.z_r12) << ','
      << format_double(r.sim.q11_mean) << ',' << format_double(r.sim.q11_se) << ','
      << format_double(r.z_q11) << ','
      << format_double(r.sim.q12_mean) << ',' << format_double(r.sim.q12_se) << ','
      << format_double(r.z_q12) << ','
      << r.solver.iterations << ',' << format_double(r.solver.residual) << ','
      << format_double(r.solver.multistart_spread) << ',' << r.solver.clamp_events << ','
      << (r.solver.converged ? 1 : 0) << ',' << r.sim.seeds_used << ','
      << r.sim.seeds_requested << ',' << (r.flagged ? 1 : 0);
  return out.str();
}

json overlap_state_to_json(const OverlapState& s) {
  return {{"q", s.q}, {"rho", s.rho}, {"r", s.r}, {"rbar", s.rbar}};
}

json solve_report_to_json(const SolveReport& rep) {
  json j = overlap_state_to_json(rep.state);
  j["iterations"] = rep.iterations;
  j["residual"] = rep.residual;
  j["converged"] = rep.converged;
  j["multistart_spread"] = rep.multistart_spread;
  j["clamp_events"] = rep.clamp_events;
  return j;
}

json comparison_to_json(const ComparisonRow& r) {
  json j;
  j["param_name"] = r.param_name;
  j["param_value"] = r.param_value;
  j["theory"] = overlap_state_to_json(r.theory);
  j["theory"]["F"] = r.theory_F;
  j["theory"]["free_energy"] = r.theory_free_energy;
  j["sim"] = {{"mse_mean", r.sim.mse_mean},     {"mse_se", r.sim.mse_se},
              {"fe_mean", r.sim.fe_mean},       {"fe_se", r.sim.fe_se},
              {"r11_mean", r.sim.r11_mean},     {"r11_se", r.sim.r11_se},
              {"r12_mean", r.sim.r12_mean},     {"r12_se", r.sim.r12_se},
              {"q11_mean", r.sim.q11_mean},     {"q11_se", r.sim.q11_se},
              {"q12_mean", r.sim.q12_mean},     {"q12_se", r.sim.q12_se},
              {"seeds_used", r.sim.seeds_used}, {"seeds_requested", r.sim.seeds_requested}};
  j["z_scores"] = {{"mse", r.z_mse}, {"fe", r.z_fe},   {"r11", r.z_r11},
                   {"r12", r.z_r12}, {"q11", r.z_q11}, {"q12", r.z_q12}};
  j["solver"] = solve_report_to_json(r.solver);
  j["flagged"] = r.flagged;
  return j;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("sweep", "missing sweep section");
  const QuadratureGrid grid =
      make_grid(cfg.solver.quad_nodes_outer, cfg.solver.quad_nodes_inner);
  std::vector<SweepRow> rows;
  for (double v : cfg.sweep->grid) {
    const ModelParams model = apply_sweep_value(cfg.model, cfg.sweep->param_name, v);
    SweepRow row;
    row.value = v;
    row.report = solve_fixed_point(model, grid, cfg.solver.solve_options());
    if (row.report.state.rho > row.report.state.q) {
      row.F = free_energy_F(model, row.report.state.q, row.report.state.rho, grid);
      row.free_energy = -model.kappa * model.gamma + row.F;
    } else {
      row.F = row.free_energy = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv_header(const std::string& param_name) {
  return param_name + ",q,rho,r,rbar,F,free_energy,iterations,residual,multistart_spread,converged";
}

std::string sweep_csv_row(const SweepRow& r) {
  std::ostringstream out;
  out << format_double(r.value) << ',' << format_double(r.report.state.q) << ','
      << format_double(r.report.state.rho) << ',' << format_double(r.report.state.r) << ','
      << format_double(r.report.state.rbar) << ',' << format_double(r.F) << ','
      << format_double(r.free_energy) << ',' << r.report.iterations << ','
      << format_double(r.report.residual) << ','
      << format_double(r.report.multistart_spread) << ','
      << (r.report.converged ? 1 : 0);
  return out.str();
}

void write_text(const OutputSettings& out, const std::string& text) {
  if (out.path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out.path);
  if (!f) throw std::runtime_error("cannot open output file '" + out.path + "'");
  f << text;
}

}  // namespace rsreg
