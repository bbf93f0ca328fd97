#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rsreg/replica.hpp"
#include "rsreg/simulate.hpp"

namespace rsreg {

// Malformed configuration; carries the JSON field path for the usage message.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error("config error at '" + path + "': " + what) {}
};

struct SolverSettings {
  double damping = 0.5;
  double tol = 1e-10;
  int max_iter = 10000;
  int n_starts = 4;
  int quad_nodes_outer = 80;
  int quad_nodes_inner = 80;

  SolveOptions solve_options() const {
    SolveOptions o;
    o.damping = damping;
    o.tol = tol;
    o.max_iter = max_iter;
    o.n_starts = n_starts;
    return o;
  }
};

struct SimSettings {
  int n = 200;
  std::vector<std::uint64_t> seeds;
  XStarMode x_star_mode = XStarMode::DeterministicNorm;
  std::string sampler_kind = "exact_gaussian";
  SamplerConfig sampler;
  int n_replicas = 2;
  int n_samples = 200;  // posterior draws per replica in exact mode
  std::optional<std::string> sample_dump_path;
};

struct SweepSettings {
  std::string param_name;  // alpha | delta_star | delta | kappa | gamma | beta
  std::vector<double> grid;
};

struct OutputSettings {
  std::string format = "csv";
  std::string path;  // empty = stdout
};

struct ExperimentConfig {
  ModelParams model = ModelParams::regression(1.0, 1.0, 0.5, 1.0, Potential::zero());
  SolverSettings solver;
  std::optional<SimSettings> sim;
  std::optional<SweepSettings> sweep;
  OutputSettings output;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
  nlohmann::json to_json() const;  // with all defaults made explicit
};

// Model with one sweepable scalar replaced; "beta" applies the inverse
// temperature reparametrization of the quadratic model.
ModelParams apply_sweep_value(const ModelParams& base, const std::string& name,
                              double value);

struct SimAggregate {
  double mse_mean = 0.0, mse_se = 0.0;
  double fe_mean = 0.0, fe_se = 0.0;  // NaN when unavailable
  double r11_mean = 0.0, r11_se = 0.0;
  double r12_mean = 0.0, r12_se = 0.0;
  double q11_mean = 0.0, q11_se = 0.0;
  double q12_mean = 0.0, q12_se = 0.0;
  int seeds_requested = 0;
  int seeds_used = 0;  // seeds that failed sampler health are dropped
};

struct ComparisonRow {
  std::string param_name;
  double param_value = 0.0;
  OverlapState theory;
  double theory_F = 0.0;
  double theory_free_energy = 0.0;  // -kappa*gamma + F
  SimAggregate sim;
  double z_mse = 0.0, z_fe = 0.0, z_r11 = 0.0, z_r12 = 0.0, z_q11 = 0.0, z_q12 = 0.0;
  SolveReport solver;
  bool flagged = false;  // any |z| > 3
};

// Per-seed finite-N simulation: exact Gaussian posterior for quadratic/zero
// loss, MALA otherwise (free energy absent).
SimAggregate run_simulation(const ModelParams& model, const SimSettings& sim,
                            int workers);

ComparisonRow compare_point(const ModelParams& model, const SolverSettings& solver,
                            const SimSettings& sim, int workers,
                            const std::string& param_name = "",
                            double param_value = 0.0);

std::string comparison_csv_header();
std::string comparison_csv_row(const ComparisonRow& row);
nlohmann::json comparison_to_json(const ComparisonRow& row);

struct SweepRow {
  double value = 0.0;
  SolveReport report;
  double F = 0.0;
  double free_energy = 0.0;
};

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg);
std::string sweep_csv_header(const std::string& param_name);
std::string sweep_csv_row(const SweepRow& row);

nlohmann::json solve_report_to_json(const SolveReport& rep);
nlohmann::json overlap_state_to_json(const OverlapState& s);

// 17 significant digits, round-trip safe.
std::string format_double(double v);

void write_text(const OutputSettings& out, const std::string& text);

}  // namespace rsreg
