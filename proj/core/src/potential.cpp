#include "rsreg/potential.hpp"

#include <algorithm>
#include <cmath>

namespace rsreg {

Potential Potential::quadratic(double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("quadratic potential requires delta > 0");
  return Potential(PotentialKind::Quadratic, delta);
}

Potential Potential::pseudo_huber(double b) {
  if (!(b > 0.0)) throw std::invalid_argument("pseudo-Huber potential requires b > 0");
  return Potential(PotentialKind::PseudoHuber, b);
}

Potential Potential::zero() { return Potential(PotentialKind::Zero, 0.0); }

double Potential::delta() const {
  if (kind_ != PotentialKind::Quadratic)
    throw std::logic_error("delta() is only defined for the quadratic potential");
  return param_;
}

std::string Potential::kind_name() const {
  switch (kind_) {
    case PotentialKind::Quadratic: return "quadratic";
    case PotentialKind::PseudoHuber: return "pseudo_huber";
    case PotentialKind::Zero: return "zero";
  }
  return "?";
}

PotentialValue Potential::eval(double s) const {
  if (!std::isfinite(s)) throw std::domain_error("potential argument must be finite");
  switch (kind_) {
    case PotentialKind::Quadratic:
      return {-s * s / (2.0 * param_), -s / param_, -1.0 / param_};
    case PotentialKind::PseudoHuber: {
      const double b = param_;
      const double t = std::sqrt(1.0 + s * s / (b * b));
      // u = b^2 (1 - t), u' = -s/t, u'' = -1/t^3
      return {b * b * (1.0 - t), -s / t, -1.0 / (t * t * t)};
    }
    case PotentialKind::Zero:
      return {0.0, 0.0, 0.0};
  }
  throw std::logic_error("unreachable potential kind");
}

GrowthReport check_growth(const Potential& p, double grid_half_width,
                          int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("check_growth needs at least 2 grid points");
  GrowthReport rep{0.0, 0, 0};
  for (int i = 0; i < grid_points; ++i) {
    const double s = -grid_half_width +
                     2.0 * grid_half_width * static_cast<double>(i) /
                         static_cast<double>(grid_points - 1);
    const PotentialValue v = p.eval(s);
    if (v.u > 0.0) ++rep.violations_nonpositive;
    if (v.d2u > 0.0) ++rep.violations_concave;
    const double need = std::abs(v.du) / (1.0 + std::sqrt(std::abs(v.u)));
    rep.d = std::max(rep.d, need);
  }
  return rep;
}

}  // namespace rsreg
