#include "rsreg/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rsreg {

HermiteRule hermite_rule(int n) {
  if (n < 2 || n > 512) throw std::invalid_argument("hermite_rule: n must be in [2, 512]");
  // Jacobi matrix of the probabilists' Hermite polynomials: zero diagonal,
  // off-diagonal sqrt(k). Eigenvalues are the nodes of the N(0,1) rule,
  // weights are the squared first eigenvector components.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  if (es.info() != Eigen::Success) throw std::runtime_error("hermite_rule: eigensolver failed");

  // Weight via the Christoffel function w = 1 / sum_k p_k(x)^2 over the
  // orthonormal Hermite polynomials. Squared first eigenvector components
  // bottom out near machine epsilon squared, which overweights far-tail
  // nodes by many orders of magnitude; this form keeps full relative
  // accuracy down to the underflow threshold.
  auto christoffel_weight = [n](double x) {
    double pm = 0.0, pk = 1.0;  // p_{-1}, p_0
    double sum = 1.0, logscale = 0.0;
    for (int k = 1; k < n; ++k) {
      const double pn = (x * pk - std::sqrt(static_cast<double>(k - 1)) * pm) /
                        std::sqrt(static_cast<double>(k));
      pm = pk;
      pk = pn;
      sum += pk * pk;
      if (std::abs(pk) > 1e140) {
        pm *= 1e-140;
        pk *= 1e-140;
        sum *= 1e-280;
        logscale += 140.0 * std::log(10.0);
      }
    }
    const double log_w = -2.0 * logscale - std::log(sum);
    return log_w < -745.0 ? 0.0 : std::exp(log_w);
  };

  HermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int j = 0; j < n; ++j) {
    rule.nodes[j] = es.eigenvalues()(j);
    rule.weights[j] = christoffel_weight(rule.nodes[j]);
  }
  // Symmetrize: eigenvalues of the symmetric Jacobi matrix come out sorted,
  // pair up +/- nodes to kill the O(eps) asymmetry of the eigensolver.
  for (int j = 0; j < n / 2; ++j) {
    const int jr = n - 1 - j;
    const double x = 0.5 * (rule.nodes[jr] - rule.nodes[j]);
    const double w = 0.5 * (rule.weights[j] + rule.weights[jr]);
    rule.nodes[j] = -x;
    rule.nodes[jr] = x;
    rule.weights[j] = w;
    rule.weights[jr] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadratureGrid make_grid(int n_outer, int n_inner) {
  return {hermite_rule(n_outer), hermite_rule(n_inner)};
}

InnerMoments inner_moments(const QuadratureGrid& grid, const ThetaSpec& theta,
                           const Potential& p, double z_tilde) {
  const int n = grid.inner.size();
  const double m = z_tilde * theta.m_coeff;

  double u_max = -std::numeric_limits<double>::infinity();
  // One potential evaluation per node, reused by all four sums.
  thread_local std::vector<PotentialValue> vals;
  vals.resize(n);
  for (int j = 0; j < n; ++j) {
    vals[j] = p.eval(m + theta.s_coeff * grid.inner.nodes[j]);
    u_max = std::max(u_max, vals[j].u);
  }

  double s0 = 0.0, s1 = 0.0, s2 = 0.0, su = 0.0;
  for (int j = 0; j < n; ++j) {
    const double w = grid.inner.weights[j] * std::exp(vals[j].u - u_max);
    s0 += w;
    s1 += w * vals[j].du;
    s2 += w * (vals[j].d2u + vals[j].du * vals[j].du);
    su += w * vals[j].u;
  }

  InnerMoments mom;
  mom.log_e0 = u_max + std::log(s0);
  mom.r1 = s1 / s0;
  mom.r2 = s2 / s0;
  mom.ru = su / s0;
  const double scale = std::exp(u_max);
  mom.e0 = scale * s0;
  mom.e1 = scale * s1;
  mom.e2 = scale * s2;
  mom.e12 = scale * su;
  return mom;
}

double nested_expect(const QuadratureGrid& grid, const ThetaSpec& theta,
                     const Potential& p,
                     const std::function<double(const InnerMoments&)>& g) {
  double acc = 0.0;
  for (int i = 0; i < grid.outer.size(); ++i) {
    const double v = g(inner_moments(grid, theta, p, grid.outer.nodes[i]));
    if (!std::isfinite(v))
      throw std::runtime_error("nested_expect: non-finite integrand at outer node " +
                               std::to_string(i) + " (z=" + std::to_string(grid.outer.nodes[i]) + ")");
    acc += grid.outer.weights[i] * v;
  }
  return acc;
}

}  // namespace rsreg
