#pragma once

#include <functional>
#include <vector>

#include "rsreg/potential.hpp"

namespace rsreg {

// Gauss-Hermite rule in the standard-normal convention: sum_j w_j f(x_j)
// approximates E f(Z), Z ~ N(0,1); weights sum to 1.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int size() const { return static_cast<int>(nodes.size()); }
};

HermiteRule hermite_rule(int n);

struct QuadratureGrid {
  HermiteRule outer;  // z-tilde integral
  HermiteRule inner;  // xi integral
};

QuadratureGrid make_grid(int n_outer, int n_inner);

// theta = z_tilde * m_coeff + xi * s_coeff, with m_coeff = sqrt(delta_star + q)
// and s_coeff = sqrt(rho - q).
struct ThetaSpec {
  double m_coeff;
  double s_coeff;
};

// Inner expectations over xi at fixed z_tilde:
//   e0  = E exp u(theta)
//   e1  = E u'(theta) exp u(theta)
//   e2  = E (u''(theta) + u'(theta)^2) exp u(theta)
//   e12 = E u(theta) exp u(theta)
// Sums are shifted by max u over the nodes, so the ratios and log_e0 stay
// finite even when e0 itself underflows.
struct InnerMoments {
  double e0, e1, e2, e12;
  double log_e0;
  double r1;  // e1 / e0
  double r2;  // e2 / e0
  double ru;  // e12 / e0
};

InnerMoments inner_moments(const QuadratureGrid& grid, const ThetaSpec& theta,
                           const Potential& p, double z_tilde);

// Outer expectation of g(inner moments) over z_tilde.
double nested_expect(const QuadratureGrid& grid, const ThetaSpec& theta,
                     const Potential& p,
                     const std::function<double(const InnerMoments&)>& g);

}  // namespace rsreg
