#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rsreg/harness.hpp"

using namespace rsreg;
using nlohmann::json;

namespace {

json base_config() {
  return json::parse(R"({
    "model": {
      "alpha": 2.0, "delta_star": 1.0, "kappa": 0.5, "gamma": 1.0,
      "potential": {"kind": "quadratic", "delta": 1.0}
    }
  })");
}

}  // namespace

TEST_CASE("config parsing: defaults and model fields") {
  const ExperimentConfig cfg = ExperimentConfig::from_json(base_config());
  CHECK(cfg.model.alpha == 2.0);
  CHECK(cfg.model.h == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cfg.solver.quad_nodes_outer == 80);
  CHECK(cfg.solver.damping == 0.5);
  CHECK_FALSE(cfg.sim.has_value());
  CHECK_FALSE(cfg.sweep.has_value());
}

TEST_CASE("config parsing: errors carry field paths") {
  auto expect_error = [](json j, const std::string& needle) {
    try {
      ExperimentConfig::from_json(j);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_error(json::object(), "model");
  {
    json j = base_config();
    j["model"].erase("alpha");
    expect_error(j, "model.alpha");
  }
  {
    json j = base_config();
    j["model"]["potential"]["kind"] = "cubic";
    expect_error(j, "model.potential.kind");
  }
  {
    json j = base_config();
    j["sweep"] = {{"param_name", "step"}, {"grid", {1.0}}};
    expect_error(j, "sweep.param_name");
  }
  {
    json j = base_config();
    j["sweep"] = {{"param_name", "alpha"}, {"grid", json::array()}};
    expect_error(j, "sweep.grid");
  }
  {
    json j = base_config();
    j["model"]["h"] = 3.0;  // inconsistent with gamma=1, kappa=0.5
    expect_error(j, "model.h");
  }
  {
    json j = base_config();
    j["sim"] = {{"n", 10}, {"sampler", {{"kind", "hmc"}}}};
    expect_error(j, "sim.sampler.kind");
  }
}

TEST_CASE("config round-trips through to_json") {
  json j = base_config();
  j["sim"] = {{"n", 50}, {"seeds", {1, 2, 3}}, {"x_star_mode", "gaussian"}};
  j["sweep"] = {{"param_name", "kappa"}, {"grid", {0.2, 0.5}}};
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const ExperimentConfig cfg2 = ExperimentConfig::from_json(cfg.to_json());
  CHECK(cfg2.model.alpha == cfg.model.alpha);
  CHECK(cfg2.sim->seeds == cfg.sim->seeds);
  CHECK(cfg2.sim->x_star_mode == XStarMode::Gaussian);
  CHECK(cfg2.sweep->grid == cfg.sweep->grid);
  CHECK(cfg2.to_json() == cfg.to_json());
}

TEST_CASE("apply_sweep_value keeps the regression link h = 2k sqrt(gamma)") {
  const ExperimentConfig cfg = ExperimentConfig::from_json(base_config());
  const ModelParams swept = apply_sweep_value(cfg.model, "kappa", 2.0);
  CHECK(swept.kappa == 2.0);
  CHECK(swept.h == doctest::Approx(2.0 * 2.0 * 1.0).epsilon(1e-15));

  const ModelParams g0 = apply_sweep_value(cfg.model, "gamma", 0.0);
  CHECK(g0.h == 0.0);

  const ModelParams beta = apply_sweep_value(cfg.model, "beta", 2.0);
  CHECK(beta.kappa == 1.0);
  CHECK(beta.potential.delta() == 0.5);
}

TEST_CASE("sweep produces one converged row per grid point") {
  json j = base_config();
  j["sweep"] = {{"param_name", "alpha"}, {"grid", {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0}}};
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const auto rows = run_sweep(cfg);
  REQUIRE(rows.size() == 8);
  for (const auto& r : rows) CHECK(r.report.converged);

  // gamma = 0 row equals the h = 0 theory
  json j0 = base_config();
  j0["sweep"] = {{"param_name", "gamma"}, {"grid", {0.0}}};
  const auto rows0 = run_sweep(ExperimentConfig::from_json(j0));
  ModelParams h0 = apply_sweep_value(cfg.model, "gamma", 0.0);
  CHECK(rows0[0].report.state.q ==
        doctest::Approx(closed_form_quadratic(h0).q).epsilon(1e-8));
}

TEST_CASE("CSV schema is stable") {
  CHECK(comparison_csv_header() ==
        "param_name,param_value,"
        "theory_q,theory_rho,theory_r,theory_rbar,theory_F,theory_free_energy,"
        "sim_mse_mean,sim_mse_se,z_mse,"
        "sim_fe_mean,sim_fe_se,z_fe,"
        "sim_r11_mean,sim_r11_se,z_r11,"
        "sim_r12_mean,sim_r12_se,z_r12,"
        "sim_q11_mean,sim_q11_se,z_q11,"
        "sim_q12_mean,sim_q12_se,z_q12,"
        "solver_iterations,solver_residual,multistart_spread,clamp_events,"
        "converged,seeds_used,seeds_requested,flagged");
  CHECK(sweep_csv_header("alpha") ==
        "alpha,q,rho,r,rbar,F,free_energy,iterations,residual,multistart_spread,converged");
}

TEST_CASE("float formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-17, 12345.6789, -2.5e300}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("compare_point is deterministic and statistically sane") {
  json j = base_config();
  j["sim"] = {{"n", 60}, {"seeds", {1, 2, 3, 4, 5, 6, 7, 8}}, {"n_samples", 100}};
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const ComparisonRow row = compare_point(cfg.model, cfg.solver, *cfg.sim, 2);
  CHECK(row.solver.converged);
  CHECK(row.sim.seeds_used == 8);
  CHECK(row.sim.mse_se > 0.0);
  // q target ~ 0.414; at N=60 with 8 seeds finite-size bias dominates, so
  // only check the estimate is in the right neighborhood
  CHECK(row.sim.mse_mean == doctest::Approx(row.theory.q).epsilon(0.5));

  const ComparisonRow row2 = compare_point(cfg.model, cfg.solver, *cfg.sim, 4);
  CHECK(comparison_csv_row(row) == comparison_csv_row(row2));

  const json jr = comparison_to_json(row);
  CHECK(jr.at("sim").at("seeds_used") == 8);
  CHECK(jr.at("theory").contains("free_energy"));
}
