#include "randcontrol/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "randcontrol/errors.hpp"

namespace randcontrol {

double FdSolution::value_at(double t, double x) const {
  double dt = horizon / nt;
  double dx = (grid.x_hi - grid.x_lo) / grid.nx;
  double ti = std::min(std::max(t / dt, 0.0), static_cast<double>(nt));
  double xi = std::min(std::max((x - grid.x_lo) / dx, 0.0), static_cast<double>(grid.nx));
  int t0 = std::min(static_cast<int>(ti), nt - 1);
  int x0 = std::min(static_cast<int>(xi), grid.nx - 1);
  double wt = ti - t0;
  double wx = xi - x0;
  return (1.0 - wt) * ((1.0 - wx) * v(t0, x0) + wx * v(t0, x0 + 1)) +
         wt * ((1.0 - wx) * v(t0 + 1, x0) + wx * v(t0 + 1, x0 + 1));
}

FdSolution hjb_fd_solve(const ProblemSpec& spec, const FdGrid& grid) {
  spec.validate();
  if (spec.dim_x != 1 || spec.dim_w != 1) throw ConfigError("FD solver supports scalar problems");
  if (!(grid.x_hi > grid.x_lo)) throw ConfigError("FD grid needs x_hi > x_lo");
  if (grid.nx < 4) throw ConfigError("FD grid needs at least 4 cells");
  if (grid.nx > 400) throw ConfigError("FD grid capped at 400 cells");

  double dx = (grid.x_hi - grid.x_lo) / grid.nx;

  // stability bounds over the grid and action set
  double max_sig2 = 0.0, max_b = 0.0;
  for (int i = 0; i <= grid.nx; ++i) {
    Vec x(1);
    x(0) = grid.x_lo + i * dx;
    for (int a = 0; a < spec.space.n_actions(); ++a) {
      double av = spec.action_value(a);
      for (double t : {0.0, 0.5 * spec.horizon, spec.horizon}) {
        max_sig2 = std::max(max_sig2, std::pow(spec.diffusion(t, x, av)(0, 0), 2));
        max_b = std::max(max_b, std::abs(spec.drift(t, x, av)(0)));
      }
    }
  }
  // explicit monotone scheme: dt * (sigma^2 / dx^2 + |b| / dx) <= 1
  double denom = max_sig2 / (dx * dx) + max_b / dx;
  int nt_min = denom > 0.0 ? static_cast<int>(std::ceil(spec.horizon * denom / 0.9)) : 1;
  int nt = grid.nt > 0 ? grid.nt : nt_min;
  if (nt < nt_min) {
    std::ostringstream os;
    os << "FD time step violates the stability bound; need nt >= " << nt_min;
    throw ConfigError(os.str());
  }
  double dt = spec.horizon / nt;

  FdSolution sol;
  sol.grid = grid;
  sol.horizon = spec.horizon;
  sol.nt = nt;
  sol.v.resize(nt + 1, grid.nx + 1);

  for (int i = 0; i <= grid.nx; ++i) {
    Vec x(1);
    x(0) = grid.x_lo + i * dx;
    sol.v(nt, i) = spec.terminal(x);
  }

  Vec xv(1);
  for (int kk = nt - 1; kk >= 0; --kk) {
    double t = kk * dt;
    // boundary rows stay clamped to the terminal profile
    sol.v(kk, 0) = sol.v(nt, 0);
    sol.v(kk, grid.nx) = sol.v(nt, grid.nx);
    for (int i = 1; i < grid.nx; ++i) {
      xv(0) = grid.x_lo + i * dx;
      double best = -std::numeric_limits<double>::infinity();
      double vm = sol.v(kk + 1, i - 1), vc = sol.v(kk + 1, i), vp = sol.v(kk + 1, i + 1);
      for (int a = 0; a < spec.space.n_actions(); ++a) {
        double av = spec.action_value(a);
        double b = spec.drift(t, xv, av)(0);
        double sig2 = std::pow(spec.diffusion(t, xv, av)(0, 0), 2);
        double diff = 0.5 * sig2 * (vp - 2.0 * vc + vm) / (dx * dx);
        double adv = b >= 0.0 ? b * (vp - vc) / dx : b * (vc - vm) / dx;
        double cand = vc + dt * (diff + adv + spec.running(t, xv, av));
        best = std::max(best, cand);
      }
      if (!std::isfinite(best)) throw NumericalError("FD solver produced a non-finite value");
      sol.v(kk, i) = best;
    }
  }
  return sol;
}

double bangbang_closed_form(double t, double x, double horizon) {
  return -std::max(std::abs(x) - (horizon - t), 0.0);
}

double linear_expectation_oracle(double c0, double c1, double x0, double horizon, double a_lin,
                                 double b_lin) {
  double mean;
  if (std::abs(c1) < 1e-14)
    mean = x0 + c0 * horizon;
  else
    mean = x0 * std::exp(c1 * horizon) + c0 / c1 * (std::exp(c1 * horizon) - 1.0);
  return a_lin * mean + b_lin;
}

BenchmarkSpec make_benchmark(const std::string& name, double x0) {
  BenchmarkSpec bench;
  bench.name = name;
  ProblemSpec& p = bench.problem;
  p.dim_x = 1;
  p.dim_w = 1;
  p.horizon = 1.0;
  p.x0 = Vec::Constant(1, x0);

  if (name == "bangbang") {
    // drift = action in {-1, +1}, no noise, terminal cost -|x|
    p.space = ActionSpace::finite({-1.0, 1.0}, {1.0, 1.0}, 0);
    p.drift = [](double, const Vec&, double a) { return Vec::Constant(1, a); };
    p.diffusion = [](double, const Vec&, double) { return Mat::Zero(1, 1); };
    p.running = [](double, const Vec&, double) { return 0.0; };
    p.terminal = [](const Vec& x) { return -std::abs(x(0)); };
    p.lipschitz_L = 1.0;
    p.growth_r = 1.0;
    bench.oracle_kind = "closed_form";
  } else if (name == "lqgrid") {
    // drift = action on a five-point grid, quadratic running and terminal costs
    p.space = ActionSpace::finite({-1.0, -0.5, 0.0, 0.5, 1.0}, {0.4, 0.4, 0.4, 0.4, 0.4}, 2);
    p.drift = [](double, const Vec&, double a) { return Vec::Constant(1, a); };
    p.diffusion = [](double, const Vec&, double) { return Mat::Constant(1, 1, 0.3); };
    p.running = [](double, const Vec& x, double a) { return -(x(0) * x(0) + 0.1 * a * a); };
    p.terminal = [](const Vec& x) { return -x(0) * x(0); };
    p.lipschitz_L = 2.0;
    p.growth_r = 2.0;
    bench.oracle_kind = "fd";
    bench.fd_grid = FdGrid{-4.0, 4.0, 400, 0};
  } else if (name == "gbm_terminal") {
    // uncontrolled geometric dynamics, linear terminal reward
    p.space = ActionSpace::finite({0.0}, {2.0}, 0);
    p.drift = [](double, const Vec& x, double) { return Vec::Constant(1, 0.5 * x(0)); };
    p.diffusion = [](double, const Vec& x, double) { return Mat::Constant(1, 1, 0.2 * x(0)); };
    p.running = [](double, const Vec&, double) { return 0.0; };
    p.terminal = [](const Vec& x) { return x(0); };
    p.lipschitz_L = 1.0;
    p.growth_r = 1.0;
    bench.oracle_kind = "linear_expectation";
  } else {
    throw ConfigError("unknown benchmark '" + name + "'");
  }
  return bench;
}

double BenchmarkSpec::oracle_value() const {
  if (oracle_kind == "closed_form") return bangbang_closed_form(0.0, problem.x0(0), problem.horizon);
  if (oracle_kind == "linear_expectation")
    return linear_expectation_oracle(0.0, 0.5, problem.x0(0), problem.horizon, 1.0, 0.0);
  if (oracle_kind == "fd") return hjb_fd_solve(problem, fd_grid).value_at(0.0, problem.x0(0));
  throw ConfigError("unknown oracle kind '" + oracle_kind + "'");
}

double BenchmarkSpec::oracle_grid_error() const {
  if (oracle_kind != "fd") return 0.0;
  FdGrid coarse = fd_grid;
  coarse.nx = fd_grid.nx / 2;
  coarse.nt = 0;
  double fine = hjb_fd_solve(problem, fd_grid).value_at(0.0, problem.x0(0));
  double half = hjb_fd_solve(problem, coarse).value_at(0.0, problem.x0(0));
  return std::abs(fine - half);
}

}  // namespace randcontrol
