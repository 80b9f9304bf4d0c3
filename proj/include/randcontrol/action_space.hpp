#pragma once

#include <string>
#include <vector>

#include "randcontrol/errors.hpp"

namespace randcontrol {

// Mark space of the exogenous jump control together with its finite intensity
// measure lambda. The simulation pipeline works on finite spaces; an interval
// space carries a uniform density and is either lifted directly or discretized
// into a finite space first.
struct ActionSpace {
  enum class Kind { finite, interval };

  Kind kind = Kind::finite;

  // finite part: lambda({values[j]}) = weights[j] > 0
  std::vector<double> values;
  std::vector<double> weights;
  int a0_index = 0;

  // interval part: lambda(da) = density * da on [lo, hi]
  double lo = 0.0, hi = 0.0, density = 0.0;

  static ActionSpace finite(std::vector<double> values, std::vector<double> weights, int a0_index);
  static ActionSpace interval(double lo, double hi, double density);

  // Midpoint discretization of an interval space into n_bins equal cells.
  ActionSpace discretized(int n_bins, int a0_index) const;

  int n_actions() const { return static_cast<int>(values.size()); }
  double total_mass() const;
  double a0_value() const { return values.at(a0_index); }
  void require_finite(const std::string& op) const;
};

// One segment of the lifted measure on the real line: uniform density of the
// given mass on (left, right]. Atom segments sit in (-inf, 0], the nonatomic
// remainder in (0, inf).
struct LiftedSegment {
  double left = 0.0;
  double right = 0.0;
  double mass = 0.0;
  int action_index = -1;  // -1 marks the transported nonatomic part
};

// Nonatomic measure lambda' on R with lambda = lambda' o pi^{-1}. Atoms are
// laid out left to right in mark-index order on unit intervals ending at 0;
// the leftmost atom owns the unbounded tail so the intervals partition
// (-inf, 0]. An interval space is transported by the identity shift onto
// (0, hi - lo].
class LiftedMeasure {
 public:
  ActionSpace space;
  std::vector<LiftedSegment> segments;

  double total_mass() const { return total_mass_; }

  // F(r) = lambda'((-inf, r]) / lambda'(R), continuous and piecewise linear.
  double cdf(double r) const;

  // Smallest r with cdf(r) >= u, for u in (0, 1).
  double quantile(double u) const;

  // pi(r): index of the atom owning r, or the index assigned at discretization
  // time for the transported interval part (-2 when r maps into the interval).
  int project_index(double r) const;

  // pi(r) as a numeric mark value.
  double project_value(double r) const;

  friend LiftedMeasure lift_measure(const ActionSpace& space);

 private:
  double total_mass_ = 0.0;
};

LiftedMeasure lift_measure(const ActionSpace& space);

}  // namespace randcontrol
