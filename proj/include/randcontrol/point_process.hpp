#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "randcontrol/action_space.hpp"
#include "randcontrol/rng.hpp"
#include "randcontrol/stats.hpp"
#include "randcontrol/types.hpp"

namespace randcontrol {

struct MarkEvent {
  double time = 0.0;
  int mark = -1;        // action index in the space
  double lifted = std::numeric_limits<double>::quiet_NaN();  // real pre-image under the lift, if sampled through it
};

// Marked point path on (0, horizon]: strictly increasing times, marks in the space.
struct MarkedPointPath {
  double horizon = 0.0;
  std::vector<MarkEvent> events;
};

// Right-continuous pure-jump control driven by a marked point path, anchored at a0.
struct JumpControlPath {
  MarkedPointPath path;
  int a0 = 0;

  int action_at(double t) const;    // I_t
  int action_left(double t) const;  // I_{t-}
};

// Predictable intensity reweighting field nu(t, x, i, a): t is calendar time, x the
// state fed in by the caller, i the current control mark, a the candidate mark.
// Declared bounds are enforced at every evaluation site.
struct IntensityField {
  std::function<double(double t, const Vec& x, int i, int a)> evaluate;
  double nu_min = 1.0;
  double nu_max = 1.0;
  Vec theta;  // parameters when the field comes from a family

  double checked(double t, const Vec& x, int i, int a) const;
};

// Poisson marked point process: Exp(lambda(A)) interarrivals, i.i.d. marks with
// law lambda(da)/lambda(A), the two sequences independent.
MarkedPointPath sample_poisson_mpp(const ActionSpace& space, double horizon, RngStream& stream);

// Same law, sampled through the lifted measure so every event carries its real
// pre-image coordinate. Base input for the time-change construction.
MarkedPointPath sample_poisson_mpp_lifted(const LiftedMeasure& lifted, double horizon, RngStream& stream);

// Girsanov weight kappa_t for the reweighting nu along a control path. The field
// is frozen per grid cell in (t, x) at the left endpoint while the i argument
// tracks jumps exactly; the exponent integral is then exact for the frozen field,
// so the weight is an exact density for a genuinely predictable intensity.
// `states` has one row per grid point (nullptr = zero state).
std::vector<double> girsanov_weight_trace(const JumpControlPath& ctrl, const ActionSpace& space,
                                          const IntensityField& nu, const TimeGrid& grid,
                                          const Mat* states);

double girsanov_weight(const JumpControlPath& ctrl, const ActionSpace& space, const IntensityField& nu,
                       const TimeGrid& grid, const Mat* states, double t);

// Predictable test field H(t, history strictly before t, candidate mark).
// `n_before` counts the events of `path` with time < t.
using TestField = std::function<double(double t, const MarkedPointPath& path, int n_before, int a)>;

// Mean and standard error of  int H dmu - int int H nu lambda(da) dt  across the
// ensemble, optionally weighted (weights = nullptr means the base measure). The
// a0 anchor fixes the control value before the first event.
MeanSe compensator_residual(const std::vector<MarkedPointPath>& ensemble, const std::vector<double>* weights,
                            int a0, const ActionSpace& space, const IntensityField& nu,
                            const TimeGrid& grid, const TestField& H);

// State feed for sequential event constructions. Queries arrive with
// nondecreasing grid index; committed jumps affect the state from the next
// grid point after the jump time.
class TimeChangeEnv {
 public:
  virtual ~TimeChangeEnv() = default;
  virtual const Vec& state_at(int grid_index) = 0;
  virtual void commit_jump(double t, int mark) = 0;
};

// Environment for intensity fields that ignore the state.
class ZeroEnv : public TimeChangeEnv {
 public:
  explicit ZeroEnv(int dim = 1) : x_(Vec::Zero(dim)) {}
  const Vec& state_at(int) override { return x_; }
  void commit_jump(double, int) override {}

 private:
  Vec x_;
};

// Time-change construction: transforms a base Poisson path (with lifted marks)
// into a path with compensator nu(t,a) lambda(da) dt under the base measure.
// Event n+1 lands where the clock (1/lambda(A)) int int nu dlambda first reaches
// the base interarrival; its mark comes from inverting the nu-weighted lifted
// CDF at the base mark's quantile. The base path must reach nu_max * grid.horizon().
MarkedPointPath time_change_sequence(const MarkedPointPath& base, const LiftedMeasure& lifted,
                                     const IntensityField& nu, const TimeGrid& grid,
                                     TimeChangeEnv& env, int a0);

// Deterministic piecewise-constant control on [0, horizon]: action index
// actions[n] on [times[n], times[n+1]).
struct PiecewiseControl {
  std::vector<double> times;  // 0 = s_0 < ... < s_N = horizon
  std::vector<int> actions;   // size N

  int action_at(double t) const;
};

// Jump-control approximation of a deterministic control: a rate-escalation
// cascade places one event shortly after each switch time (marks drawn from the
// normalized lambda on the 1/m-ball around the target action), superposed with
// an independent Poisson of compensator lambda(da) dt / k to keep the intensity
// bounded away from zero.
struct ApproximateControlResult {
  JumpControlPath control;
  double distance = 0.0;      // empirical Krylov distance to the input control
  double lag_distance = 0.0;  // contribution of the cascade trajectory alone
  std::vector<double> cascade_open;   // S_n: window opens
  std::vector<double> cascade_close;  // R_n: event time (window closes)
  std::vector<double> cascade_rate;   // lambda_{nm} = m * 2^n
  std::vector<int> cascade_target;    // alpha_n: action approximated by window n
  double nu_floor = 0.0;              // 1/k

  // Compensator density of the merged process with respect to lambda(da) dt.
  double nu_hat(double t, int a, const ActionSpace& space, int m) const;
};

ApproximateControlResult approximate_control(const PiecewiseControl& alpha, const ActionSpace& space,
                                             int m, int k, std::uint64_t master_seed,
                                             std::uint64_t replication);

// Krylov control metric on mark indices: discrete metric of value 1/2.
inline double mark_distance(int a, int b) { return a == b ? 0.0 : 0.5; }

// Exact integral of mark_distance between two piecewise-constant index paths.
double piecewise_distance(const std::vector<double>& break_a, const std::vector<int>& act_a,
                          const std::vector<double>& break_b, const std::vector<int>& act_b,
                          double horizon);

}  // namespace randcontrol
