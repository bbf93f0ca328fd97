#include "rsreg/replica.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsreg {

namespace {

constexpr double kDomainEps = 1e-12;

ThetaSpec theta_of(const ModelParams& params, double q, double rho) {
  return {std::sqrt(params.delta_star + q), std::sqrt(rho - q)};
}

double sup_dist(const OverlapState& a, const OverlapState& b) {
  return std::max({std::abs(a.q - b.q), std::abs(a.rho - b.rho),
                   std::abs(a.r - b.r), std::abs(a.rbar - b.rbar)});
}

}  // namespace

ModelParams ModelParams::regression(double alpha, double delta_star, double kappa,
                                    double gamma, const Potential& pot) {
  ModelParams p;
  p.alpha = alpha;
  p.delta_star = delta_star;
  p.kappa = kappa;
  p.gamma = gamma;
  p.h = 2.0 * kappa * std::sqrt(gamma);
  p.potential = pot;
  p.validate();
  return p;
}

void ModelParams::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  if (!(delta_star >= 0.0)) throw std::invalid_argument("delta_star must be >= 0");
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be > 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
}

void map_psi(const ModelParams& params, double r, double rbar, double& q, double& rho) {
  const double denom = 2.0 * params.kappa + r - rbar;
  if (!(denom > 0.0)) throw std::domain_error("map_psi: 2*kappa + r - rbar must be > 0");
  q = (r + params.h * params.h) / (denom * denom);
  rho = q + 1.0 / denom;
}

void map_phi(const ModelParams& params, double q, double rho,
             const QuadratureGrid& grid, double& r, double& rbar) {
  if (!(q >= 0.0 && q < rho)) throw std::domain_error("map_phi: requires 0 <= q < rho");
  if (params.potential.is_zero()) {
    r = 0.0;
    rbar = 0.0;
    return;
  }
  const ThetaSpec theta = theta_of(params, q, rho);
  // One pass over the outer nodes; both moments come from the same inner sums.
  double acc_r = 0.0, acc_rbar = 0.0;
  for (int i = 0; i < grid.outer.size(); ++i) {
    const InnerMoments m = inner_moments(grid, theta, params.potential, grid.outer.nodes[i]);
    if (!std::isfinite(m.r1) || !std::isfinite(m.r2))
      throw std::runtime_error("map_phi: non-finite inner moments at outer node " +
                               std::to_string(i));
    acc_r += grid.outer.weights[i] * m.r1 * m.r1;
    acc_rbar += grid.outer.weights[i] * m.r2;
  }
  r = params.alpha * acc_r;
  rbar = params.alpha * acc_rbar;
}

SolveReport solve_fixed_point(const ModelParams& params, const QuadratureGrid& grid,
                              const SolveOptions& opts) {
  params.validate();
  if (!(opts.damping > 0.0 && opts.damping <= 1.0))
    throw std::invalid_argument("damping must be in (0, 1]");

  OverlapState base_init;
  if (opts.init) {
    base_init = *opts.init;
  } else {
    base_init = {0.0, 0.0, 0.0, 0.0};
    map_psi(params, 0.0, 0.0, base_init.q, base_init.rho);
  }

  auto run_single = [&](const OverlapState& init, SolveReport& rep) {
    OverlapState x = init;
    // First half-step through psi puts the iterate in-domain regardless of init.
    if (!(x.rho > x.q)) map_psi(params, x.r, x.rbar, x.q, x.rho);
    rep.clamp_events = 0;
    for (int it = 1; it <= opts.max_iter; ++it) {
      OverlapState next = x;
      map_phi(params, x.q, x.rho, grid, next.r, next.rbar);
      next.r = (1.0 - opts.damping) * x.r + opts.damping * next.r;
      next.rbar = (1.0 - opts.damping) * x.rbar + opts.damping * next.rbar;
      if (2.0 * params.kappa + next.r - next.rbar <= kDomainEps) {
        next.rbar = 2.0 * params.kappa + next.r - kDomainEps;
        ++rep.clamp_events;
      }
      map_psi(params, next.r, next.rbar, next.q, next.rho);
      next.q = (1.0 - opts.damping) * x.q + opts.damping * next.q;
      next.rho = (1.0 - opts.damping) * x.rho + opts.damping * next.rho;
      rep.residual = sup_dist(next, x);
      rep.iterations = it;
      x = next;
      if (rep.residual <= opts.tol) {
        rep.converged = true;
        break;
      }
    }
    rep.state = x;
  };

  SolveReport main_report;
  run_single(base_init, main_report);

  // Perturbed restarts probe uniqueness; the spread is reported, not enforced.
  std::vector<OverlapState> solutions{main_report.state};
  const double factors[] = {0.5, 0.75, 1.5, 2.0, 0.6, 1.25, 1.75, 0.9};
  const int extra = std::max(0, opts.n_starts - 1);
  for (int s = 0; s < extra; ++s) {
    const double f = factors[s % 8];
    OverlapState init{base_init.q * f, base_init.rho * f + (1.0 - f) * 1e-3,
                      base_init.r * f + 0.1 * f, base_init.rbar * f};
    SolveReport rep;
    run_single(init, rep);
    if (rep.converged) solutions.push_back(rep.state);
  }
  for (std::size_t i = 0; i < solutions.size(); ++i)
    for (std::size_t j = i + 1; j < solutions.size(); ++j)
      main_report.multistart_spread =
          std::max(main_report.multistart_spread, sup_dist(solutions[i], solutions[j]));
  return main_report;
}

OverlapState closed_form_quadratic(const ModelParams& params) {
  if (!params.potential.is_quadratic())
    throw std::invalid_argument("closed_form_quadratic: potential must be quadratic");
  params.validate();
  const double delta = params.potential.delta();
  const double alpha = params.alpha;
  const double kappa = params.kappa;
  const double h = params.h;

  const double t = 2.0 * kappa * delta + alpha - 1.0;
  const double c = (std::sqrt(t * t + 8.0 * kappa * delta) - t) / (4.0 * kappa);
  const double dc = delta + c;
  const double denom = dc * dc - alpha * c * c;
  if (!(denom > 0.0))
    throw std::runtime_error("closed_form_quadratic: (delta+c)^2 - alpha*c^2 <= 0");

  OverlapState s;
  s.q = c * c * (h * h * dc * dc + params.delta_star * alpha) / denom;
  s.rho = s.q + c;
  s.r = alpha * (params.delta_star + s.q) / (dc * dc);
  s.rbar = s.r - alpha / dc;
  return s;
}

double free_energy_F(const ModelParams& params, double q, double rho,
                     const QuadratureGrid& grid) {
  if (!(q >= 0.0 && q < rho)) throw std::domain_error("free_energy_F: requires 0 <= q < rho");
  const double a = rho - q;
  double u_term = 0.0;
  if (!params.potential.is_zero()) {
    const ThetaSpec theta = theta_of(params, q, rho);
    u_term = params.alpha * nested_expect(grid, theta, params.potential,
                                          [](const InnerMoments& m) { return m.log_e0; });
  }
  return u_term + 0.5 * (std::log(a) + params.h * params.h * a + rho / a -
                         2.0 * params.kappa * rho + std::log(2.0 * std::numbers::pi));
}

double free_energy_Fbar(const ModelParams& params, const OverlapState& st,
                        const QuadratureGrid& grid) {
  if (!(st.q >= 0.0 && st.q < st.rho))
    throw std::domain_error("free_energy_Fbar: requires 0 <= q < rho");
  const double denom = 2.0 * params.kappa + st.r - st.rbar;
  if (!(denom > 0.0))
    throw std::domain_error("free_energy_Fbar: 2*kappa + r - rbar must be > 0");
  double u_term = 0.0;
  if (!params.potential.is_zero()) {
    const ThetaSpec theta = theta_of(params, st.q, st.rho);
    u_term = params.alpha * nested_expect(grid, theta, params.potential,
                                          [](const InnerMoments& m) { return m.log_e0; });
  }
  return u_term + 0.5 * ((st.r + params.h * params.h) / denom - std::log(denom) +
                         st.r * st.q - st.rbar * st.rho +
                         std::log(2.0 * std::numbers::pi));
}

RegressionPrediction predict_regression(const ModelParams& params,
                                        const QuadratureGrid& grid,
                                        const SolveOptions& opts) {
  params.validate();
  RegressionPrediction pred;
  pred.report = solve_fixed_point(params, grid, opts);
  pred.mse_per_n = pred.report.state.q;
  pred.free_energy = -params.kappa * params.gamma +
                     free_energy_F(params, pred.report.state.q, pred.report.state.rho, grid);
  return pred;
}

ModelParams beta_reparametrize(const ModelParams& params, double beta) {
  if (!params.potential.is_quadratic())
    throw std::invalid_argument("beta_reparametrize: potential must be quadratic");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  ModelParams out = params;
  out.potential = Potential::quadratic(params.potential.delta() / beta);
  out.kappa = beta * params.kappa;
  out.h = 2.0 * out.kappa * std::sqrt(params.gamma);
  return out;
}

ReferenceEndpoints reference_endpoints(const ModelParams& params) {
  params.validate();
  ReferenceEndpoints ep;
  const double u0 = params.potential.eval(0.0).u;
  ep.f0 = params.alpha * u0 + params.h * params.h / (4.0 * params.kappa) +
          0.5 * std::log(std::numbers::pi / params.kappa);
  ep.state0 = {0.0, 0.0, 0.0, 0.0};
  map_psi(params, 0.0, 0.0, ep.state0.q, ep.state0.rho);
  return ep;
}

}  // namespace rsreg
