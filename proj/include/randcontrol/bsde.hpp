#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "randcontrol/randomized.hpp"
#include "randcontrol/sde.hpp"

namespace randcontrol {

// Polynomial features in x tensored with an indicator of the current action:
// block j (active iff the current action index is j) holds [1, x, .., x^degree]
// and optionally |x|. Feature count is fixed across grid times.
struct RegressionBasis {
  int degree = 3;
  bool include_abs = false;

  int block_size() const { return degree + 1 + (include_abs ? 1 : 0); }
  int feature_count(int n_actions) const { return n_actions * block_size(); }
  // writes phi(t, x, action) into `out` (size feature_count, zero outside the block)
  void features(double x, int action, int n_actions, Vec& out) const;
};

// Ensemble of (X, I, W) paths under the base Poisson measure, simulated once
// and shared across penalty levels. Scalar state and noise only.
struct BsdeBundle {
  TimeGrid grid{1.0, 1};
  int n_paths = 0;
  Mat x;                // n_paths x (n_steps+1)
  Eigen::MatrixXi act;  // n_paths x (n_steps+1), action index at each grid point
  Mat dw;               // n_paths x n_steps
};

BsdeBundle make_bsde_bundle(const ProblemSpec& spec, const TimeGrid& grid, int n_paths,
                            std::uint64_t seed);

// Backward least-squares solution of the penalized equation
//   Y_t = g(X_T) + int f ds + n int (U)^+ lambda(da) ds - int Z dW - int U dmu~.
// Coefficients are stored per grid time; index 0 and n_steps are handled in
// closed form (degenerate state at 0, terminal condition at n_steps).
struct BsdeGridSolution {
  int n_penalty = 0;
  TimeGrid grid{1.0, 1};
  int n_paths = 0;
  RegressionBasis basis;
  const ProblemSpec* spec = nullptr;

  std::vector<Vec> coef_y;  // [i] for 1 <= i <= n_steps-1, conditional mean of Y_{i+1}
  std::vector<Vec> coef_z;  // same indexing, centered Brownian covariation / dt
  std::vector<Mat> coef_u;  // same indexing, feature x action: jump-mark increments of Y

  double y0 = 0.0;     // value at time 0
  double y0_se = 0.0;  // Monte-Carlo standard error of the time-0 average
  double z0 = 0.0;
  Vec u0;  // per candidate mark at time 0

  Mat k;          // n_paths x (n_steps+1) accumulated penalty, rows nondecreasing from 0
  double g_n = 0.0;  // estimate of E int sum_a (U(a))^+ lambda({a}) dt
  Mat occupancy;     // (n_steps+1) x n_actions, fraction of paths at each action
  Mat probe_range;   // (n_steps+1) x 2, central x-range of the ensemble per time

  // Y as a function: i=0 ignores (x, action); i=n_steps returns g(x);
  // otherwise fitted mean + f dt + penalty at (x, action).
  double y_value(int i, double x, int action) const;
  // U(a) at grid time i in [0, n_steps-1]; zero for a == action by construction.
  double u_value(int i, double x, int action, int a) const;
  double z_value(int i, double x, int action) const;
};

BsdeGridSolution solve_penalized(const ProblemSpec& spec, int n_penalty, const TimeGrid& grid,
                                 const RegressionBasis& basis, int n_paths, std::uint64_t seed);
// Same backward pass on a prebuilt bundle (common paths across penalty levels).
BsdeGridSolution solve_penalized(const ProblemSpec& spec, const BsdeBundle& bundle, int n_penalty,
                                 const RegressionBasis& basis);

struct ConstraintRow {
  int n_penalty = 0;
  double y0 = 0.0;
  double y0_se = 0.0;
  double g_n = 0.0;
  double runtime_s = 0.0;  // wall time of this penalty level's backward pass
};

struct ConstraintReport {
  std::vector<ConstraintRow> trace;
  double g_n_final = 0.0;
  std::vector<std::string> warnings;  // non-fatal diagnostics (e.g. non-monotone Y0)
};

// Runs the schedule with common paths, stopping when successive Y0 values agree
// within stop_tol (stop_tol <= 0 selects 1e-3 * (1 + |Y0|)).
std::pair<BsdeGridSolution, ConstraintReport> solve_constrained(
    const ProblemSpec& spec, const std::vector<int>& n_schedule, double stop_tol,
    const TimeGrid& grid, const RegressionBasis& basis, int n_paths, std::uint64_t seed);

// Y0 minus the best reweighted gain over the family (search budget in field
// evaluations). Nonnegative up to noise whenever the family stays within the
// penalty bound, which is validated at the bound corners.
double representation_residual(const ProblemSpec& spec, const BsdeGridSolution& solution,
                               const IntensityFamily& family, int budget, std::uint64_t seed);

// nu(a) = n on {U >= 0}, epsilon on {-1 < U < 0}, -epsilon/U on {U <= -1},
// evaluated through the fitted U at the cell containing t. Satisfies
// n U^+ - nu U <= epsilon pointwise.
IntensityField extract_epsilon_optimal_intensity(const BsdeGridSolution& solution, double epsilon);

// Copy of the field with same-mark candidates forced to 1. Jumps to the current
// mark leave the control path unchanged, so the reweighted gain has the same
// mean while the weight variance drops.
IntensityField same_mark_neutral(const IntensityField& field);

// Y0 minus the best value of E[kappa_tau (int_0^tau f dr + Y_tau)] over the
// family; tau is a grid index. tau = 0 returns 0 exactly.
double dpp_residual(const ProblemSpec& spec, const BsdeGridSolution& solution,
                    const IntensityFamily& family, int tau_grid_index, int budget,
                    std::uint64_t seed);

// Max over interior grid times and probe states of the spread of Y(t, x, i)
// across current marks i with nonnegligible occupancy. Shrinks as the penalty
// grows: the limiting value does not see the auxiliary mark.
double mark_invariance_diagnostic(const BsdeGridSolution& solution);

}  // namespace randcontrol
