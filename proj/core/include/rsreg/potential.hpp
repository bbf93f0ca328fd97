#pragma once

#include <stdexcept>
#include <string>

namespace rsreg {

enum class PotentialKind { Quadratic, PseudoHuber, Zero };

struct PotentialValue {
  double u;
  double du;
  double d2u;
};

// Concave, non-positive mismatch loss u with closed-form derivatives.
// Quadratic:   u(s) = -s^2 / (2*delta)
// PseudoHuber: u(s) = b^2 * (1 - sqrt(1 + s^2/b^2))
// Zero:        u == 0 (pure-Gaussian reference)
class Potential {
 public:
  static Potential quadratic(double delta);
  static Potential pseudo_huber(double b);
  static Potential zero();

  PotentialValue eval(double s) const;

  PotentialKind kind() const { return kind_; }
  double param() const { return param_; }
  bool is_quadratic() const { return kind_ == PotentialKind::Quadratic; }
  bool is_zero() const { return kind_ == PotentialKind::Zero; }

  // Quadratic noise variance; throws for other kinds.
  double delta() const;

  std::string kind_name() const;

 private:
  Potential(PotentialKind kind, double param) : kind_(kind), param_(param) {}
  PotentialKind kind_;
  double param_;  // delta for Quadratic, b for PseudoHuber, unused for Zero
};

struct GrowthReport {
  double d;  // smallest growth constant valid on the scanned grid
  int violations_nonpositive;
  int violations_concave;
  bool ok() const { return violations_nonpositive == 0 && violations_concave == 0; }
};

// Grid scan of the growth condition |u'(s)| <= d (1 + sqrt|u(s)|) together
// with u <= 0 and u'' <= 0. Advisory; the built-in kinds satisfy it exactly.
GrowthReport check_growth(const Potential& p, double grid_half_width,
                          int grid_points);

}  // namespace rsreg
