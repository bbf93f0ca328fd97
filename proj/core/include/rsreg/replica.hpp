#pragma once

#include <optional>

#include "rsreg/potential.hpp"
#include "rsreg/quadrature.hpp"

namespace rsreg {

// Problem constants of the asymptotic theory. On the regression side the
// external field is tied to the limiting squared norm of the truth via
// h = 2*kappa*sqrt(gamma).
struct ModelParams {
  double alpha;       // sample ratio M/N
  double delta_star;  // true noise variance
  double kappa;       // prior strength
  double h;           // external field
  double gamma;       // limiting ||x*||^2 / N
  Potential potential = Potential::zero();

  static ModelParams regression(double alpha, double delta_star, double kappa,
                                double gamma, const Potential& pot);
  void validate() const;
};

// Order parameters (q, rho, r, rbar). rho > q and 2*kappa + r - rbar > 0 are
// required wherever the free energy or the maps are evaluated; rbar < 0 is
// legitimate and occurs already in the quadratic solution.
struct OverlapState {
  double q;
  double rho;
  double r;
  double rbar;
};

struct SolveOptions {
  double damping = 0.5;
  double tol = 1e-10;
  int max_iter = 10000;
  int n_starts = 4;
  std::optional<OverlapState> init;
};

struct SolveReport {
  OverlapState state;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  double multistart_spread = 0.0;
  int clamp_events = 0;
};

// (q, rho) from (r, rbar):
//   q   = (r + h^2) / (2k + r - rbar)^2
//   rho = q + 1 / (2k + r - rbar)
void map_psi(const ModelParams& params, double r, double rbar, double& q, double& rho);

// (r, rbar) from (q, rho) via the nested Gaussian expectations:
//   r    = alpha * E[(e1/e0)^2]
//   rbar = alpha * E[e2/e0]
void map_phi(const ModelParams& params, double q, double rho,
             const QuadratureGrid& grid, double& r, double& rbar);

// Damped iteration of phi then psi, from n_starts perturbed initializations.
SolveReport solve_fixed_point(const ModelParams& params, const QuadratureGrid& grid,
                              const SolveOptions& opts = {});

// Unique solution for the quadratic potential, via the constant
//   c = (sqrt((2kD + a - 1)^2 + 8kD) - (2kD + a - 1)) / (4k).
OverlapState closed_form_quadratic(const ModelParams& params);

double free_energy_F(const ModelParams& params, double q, double rho,
                     const QuadratureGrid& grid);

double free_energy_Fbar(const ModelParams& params, const OverlapState& state,
                        const QuadratureGrid& grid);

struct RegressionPrediction {
  double mse_per_n;
  double free_energy;
  SolveReport report;
};

// Asymptotic MSE/N and free energy of the regression task: solves the fixed
// point and returns (q, -kappa*gamma + F).
RegressionPrediction predict_regression(const ModelParams& params,
                                        const QuadratureGrid& grid,
                                        const SolveOptions& opts = {});

// Inverse-temperature rescaling of the quadratic model: delta -> delta/beta,
// kappa -> beta*kappa, gamma kept fixed, h recomputed. The asymptotic q is
// invariant under this map.
ModelParams beta_reparametrize(const ModelParams& params, double beta);

struct ReferenceEndpoints {
  double f0;            // alpha*u(0) + h^2/(4k) + 0.5*ln(pi/k)
  OverlapState state0;  // psi image of (r, rbar) = (0, 0)
};

ReferenceEndpoints reference_endpoints(const ModelParams& params);

}  // namespace rsreg
