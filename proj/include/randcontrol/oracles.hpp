#pragma once

#include <string>

#include "randcontrol/sde.hpp"

namespace randcontrol {

// Space-time grid for the explicit upwind dynamic-programming solver.
struct FdGrid {
  double x_lo = -4.0;
  double x_hi = 4.0;
  int nx = 400;  // spatial cells (nx + 1 nodes)
  int nt = 0;    // 0 = choose the smallest stable step count automatically
};

struct FdSolution {
  FdGrid grid;
  double horizon = 0.0;
  Mat v;  // (nt+1) x (nx+1), row 0 = time 0
  int nt = 0;

  double value_at(double t, double x) const;
};

// Explicit upwind scheme for the terminal-value dynamic-programming equation
//   -dv/dt = sup_a [ (1/2) sigma^2 v_xx + b v_x + f ],  v(T, .) = g,
// maximizing over the finite action grid. Scalar problems only; the value is
// clamped to g at the spatial boundary. Throws when the requested nt violates
// the stability (CFL) bounds.
FdSolution hjb_fd_solve(const ProblemSpec& spec, const FdGrid& grid);

// v(t, x) = -max(|x| - (T - t), 0): deterministic two-action steering toward
// the origin at unit speed with terminal cost -|x|.
double bangbang_closed_form(double t, double x, double horizon);

// E[a_lin * X_T + b_lin] for scalar affine drift dX = (c0 + c1 X) dt + sigma dW:
// the mean solves a linear ODE in closed form, independent of the noise.
double linear_expectation_oracle(double c0, double c1, double x0, double horizon, double a_lin,
                                 double b_lin);

// Named benchmark problems with a pinned reference oracle.
struct BenchmarkSpec {
  std::string name;
  ProblemSpec problem;
  std::string oracle_kind;  // "closed_form" | "fd" | "linear_expectation"
  FdGrid fd_grid;           // used when oracle_kind == "fd"

  double oracle_value() const;
  // Grid-error proxy: |v_fd(nx) - v_fd(nx/2)| for FD oracles, 0 otherwise.
  double oracle_grid_error() const;
};

// name: "bangbang" (sigma = 0, closed form), "lqgrid" (quadratic costs on an
// action grid, FD oracle), "gbm_terminal" (uncontrolled linear dynamics).
BenchmarkSpec make_benchmark(const std::string& name, double x0);

}  // namespace randcontrol
