#include "randcontrol/bsde.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>

#include <Eigen/Cholesky>

#include "randcontrol/errors.hpp"

namespace randcontrol {

void RegressionBasis::features(double x, int action, int n_actions, Vec& out) const {
  int q = block_size();
  out.setZero(n_actions * q);
  int base = action * q;
  double pw = 1.0;
  for (int k = 0; k <= degree; ++k) {
    out(base + k) = pw;
    pw *= x;
  }
  if (include_abs) out(base + degree + 1) = std::abs(x);
}

namespace {

// powers of x shared across action blocks: [1, x, .., x^deg, |x|?]
void power_block(const RegressionBasis& basis, double x, Vec& pv) {
  int q = basis.block_size();
  if (pv.size() != q) pv.resize(q);
  double pw = 1.0;
  for (int k = 0; k <= basis.degree; ++k) {
    pv(k) = pw;
    pw *= x;
  }
  if (basis.include_abs) pv(basis.degree + 1) = std::abs(x);
}

template <typename CoefLike>
double dot_block(const CoefLike& coef, int action, const Vec& pv) {
  int q = static_cast<int>(pv.size());
  double s = 0.0;
  for (int k = 0; k < q; ++k) s += coef(action * q + k) * pv(k);
  return s;
}

}  // namespace

double BsdeGridSolution::u_value(int i, double x, int action, int a) const {
  if (a == action) return 0.0;  // same-mark jumps leave (X, I) unchanged
  if (i <= 0) return u0(a);
  Vec pv;
  power_block(basis, x, pv);
  return dot_block(coef_u[i].col(a), action, pv);
}

double BsdeGridSolution::y_value(int i, double x, int action) const {
  int n_steps = grid.n_steps();
  if (i <= 0) return y0;
  if (i >= n_steps) {
    Vec xv(1);
    xv(0) = x;
    return spec->terminal(xv);
  }
  Vec pv;
  power_block(basis, x, pv);
  double fit = dot_block(coef_y[i], action, pv);
  Vec xv(1);
  xv(0) = x;
  double dt = grid.dt();
  double pen = 0.0;
  for (int a = 0; a < spec->space.n_actions(); ++a) {
    if (a == action) continue;
    pen += spec->space.weights[a] * std::max(dot_block(coef_u[i].col(a), action, pv), 0.0);
  }
  return fit + spec->running(grid.point(i), xv, spec->action_value(action)) * dt +
         n_penalty * dt * pen;
}

double BsdeGridSolution::z_value(int i, double x, int action) const {
  int n_steps = grid.n_steps();
  if (i <= 0) return z0;
  if (i >= n_steps) return 0.0;
  Vec pv;
  power_block(basis, x, pv);
  return dot_block(coef_z[i], action, pv);
}

BsdeBundle make_bsde_bundle(const ProblemSpec& spec, const TimeGrid& grid, int n_paths,
                            std::uint64_t seed) {
  spec.validate();
  spec.space.require_finite("make_bsde_bundle");
  if (spec.dim_x != 1 || spec.dim_w != 1)
    throw ConfigError("least-squares solver supports scalar state and noise only");
  if (n_paths < 2) throw ConfigError("bundle needs at least two paths");
  if (std::abs(grid.horizon() - spec.horizon) > 1e-12 * std::max(1.0, spec.horizon))
    throw ConfigError("bundle grid horizon must match the problem horizon");

  BsdeBundle bundle;
  bundle.grid = grid;
  bundle.n_paths = n_paths;
  int n_steps = grid.n_steps();
  bundle.x.resize(n_paths, n_steps + 1);
  bundle.act.resize(n_paths, n_steps + 1);
  bundle.dw.resize(n_paths, n_steps);
  LiftedMeasure lifted = lift_measure(spec.space);
  for (int p = 0; p < n_paths; ++p) {
    RngStream stream = split_stream(seed, static_cast<std::uint64_t>(p));
    BrownianPath w = sample_brownian(grid, 1, stream);
    JumpControlPath ctrl;
    ctrl.path = sample_poisson_mpp_lifted(lifted, grid.horizon(), stream);
    ctrl.a0 = spec.space.a0_index;
    StatePath path = simulate_controlled(spec, ctrl, w);
    for (int i = 0; i <= n_steps; ++i) {
      bundle.x(p, i) = path.states(i, 0);
      bundle.act(p, i) = path.actions[i];
    }
    bundle.dw.row(p) = w.increments.col(0).transpose();
  }
  return bundle;
}

namespace {

// exact constant fit: the intercept of every action block carries the value
Vec constant_coefficients(double value, const RegressionBasis& basis, int n_actions) {
  Vec coef = Vec::Zero(basis.feature_count(n_actions));
  for (int a = 0; a < n_actions; ++a) coef(a * basis.block_size()) = value;
  return coef;
}

struct TimeRegression {
  Mat phi;  // n_paths x features
  Eigen::LDLT<Mat> ldlt;

  void build(const RegressionBasis& basis, const Mat& x, const Eigen::MatrixXi& act, int i,
             int n_actions) {
    int m = static_cast<int>(x.rows());
    int p = basis.feature_count(n_actions);
    phi.setZero(m, p);
    int q = basis.block_size();
    for (int r = 0; r < m; ++r) {
      int base = act(r, i) * q;
      double pw = 1.0, xv = x(r, i);
      for (int k = 0; k <= basis.degree; ++k) {
        phi(r, base + k) = pw;
        pw *= xv;
      }
      if (basis.include_abs) phi(r, base + basis.degree + 1) = std::abs(xv);
    }
    Mat gram = phi.transpose() * phi;
    double ridge = 1e-8 * gram.trace() / p;
    gram.diagonal().array() += ridge;
    ldlt.compute(gram);
    Vec d = ldlt.vectorD();
    double dmin = d.minCoeff(), dmax = d.maxCoeff();
    if (!(dmin > 0.0) || dmax / dmin > 1e14) {
      std::ostringstream msg;
      msg << "regression Gram near singular despite ridge at time index " << i
          << " (condition estimate " << (dmin > 0.0 ? dmax / dmin : std::nan("")) << ")";
      throw NumericalError(msg.str());
    }
  }

  Vec fit(const Vec& response, const RegressionBasis& basis, int n_actions) const {
    double lo = response.minCoeff(), hi = response.maxCoeff();
    if (lo == hi) return constant_coefficients(lo, basis, n_actions);
    return ldlt.solve(phi.transpose() * response);
  }
};

}  // namespace

BsdeGridSolution solve_penalized(const ProblemSpec& spec, const BsdeBundle& bundle, int n_penalty,
                                 const RegressionBasis& basis) {
  spec.space.require_finite("solve_penalized");
  if (n_penalty < 0) throw ConfigError("penalty level must be nonnegative");
  if (basis.degree < 0) throw ConfigError("basis degree must be nonnegative");
  int m = bundle.n_paths;
  int n_steps = bundle.grid.n_steps();
  int n_act = spec.space.n_actions();
  if (m < 2 || bundle.x.rows() != m || bundle.x.cols() != n_steps + 1)
    throw ConfigError("bundle shape inconsistent");

  BsdeGridSolution sol;
  sol.n_penalty = n_penalty;
  sol.grid = bundle.grid;
  sol.n_paths = m;
  sol.basis = basis;
  sol.spec = &spec;
  sol.coef_y.resize(n_steps);
  sol.coef_z.resize(n_steps);
  sol.coef_u.resize(n_steps);
  sol.occupancy.setZero(n_steps + 1, n_act);
  sol.probe_range.setZero(n_steps + 1, 2);

  double dt = bundle.grid.dt();
  const std::vector<double>& lam = spec.space.weights;

  for (int i = 0; i <= n_steps; ++i) {
    for (int p = 0; p < m; ++p) sol.occupancy(i, bundle.act(p, i)) += 1.0;
    sol.occupancy.row(i) /= m;
    std::vector<double> xs(bundle.x.col(i).data(), bundle.x.col(i).data() + m);
    std::sort(xs.begin(), xs.end());
    sol.probe_range(i, 0) = xs[static_cast<std::size_t>(0.05 * (m - 1))];
    sol.probe_range(i, 1) = xs[static_cast<std::size_t>(0.95 * (m - 1))];
  }

  // next-time value at every candidate mark; terminal values are mark free
  Vec pv, xv(1);
  auto value_next = [&](int i_next, double x, Vec& out) {
    if (i_next >= n_steps) {
      xv(0) = x;
      out.setConstant(n_act, spec.terminal(xv));
      return;
    }
    power_block(basis, x, pv);
    xv(0) = x;
    double t = bundle.grid.point(i_next);
    for (int a = 0; a < n_act; ++a) {
      double pen = 0.0;
      for (int b = 0; b < n_act; ++b) {
        if (b == a) continue;
        pen += lam[b] * std::max(dot_block(sol.coef_u[i_next].col(b), a, pv), 0.0);
      }
      out(a) = dot_block(sol.coef_y[i_next], a, pv) +
               spec.running(t, xv, spec.action_value(a)) * dt + n_penalty * dt * pen;
    }
  };

  Mat inc = Mat::Zero(m, n_steps);  // per-path sum_a lambda_a (U)^+ at each time
  Vec r_all(m), yv(n_act);
  Mat d_resp(m, n_act);
  TimeRegression reg;

  for (int i = n_steps - 1; i >= 1; --i) {
    for (int p = 0; p < m; ++p) {
      value_next(i + 1, bundle.x(p, i + 1), yv);
      r_all(p) = yv(bundle.act(p, i + 1));
      double ycur = yv(bundle.act(p, i));
      for (int a = 0; a < n_act; ++a) d_resp(p, a) = yv(a) - ycur;
    }
    reg.build(basis, bundle.x, bundle.act, i, n_act);
    sol.coef_y[i] = reg.fit(r_all, basis, n_act);
    Vec centered = r_all - reg.phi * sol.coef_y[i];
    Vec rz = centered.cwiseProduct(bundle.dw.col(i)) / dt;
    sol.coef_z[i] = reg.fit(rz, basis, n_act);
    sol.coef_u[i].resize(basis.feature_count(n_act), n_act);
    for (int a = 0; a < n_act; ++a) sol.coef_u[i].col(a) = reg.fit(d_resp.col(a), basis, n_act);
    Mat ufit = reg.phi * sol.coef_u[i];
    for (int p = 0; p < m; ++p) {
      double s = 0.0;
      for (int a = 0; a < n_act; ++a) {
        if (a == bundle.act(p, i)) continue;
        s += lam[a] * std::max(ufit(p, a), 0.0);
      }
      inc(p, i) = s;
    }
  }

  // time 0: the state and mark are deterministic, conditional means are plain means
  Vec r0(m);
  Mat d0(m, n_act);
  for (int p = 0; p < m; ++p) {
    value_next(1, bundle.x(p, 1), yv);
    r0(p) = yv(bundle.act(p, 1));
    double ycur = yv(spec.space.a0_index);
    for (int a = 0; a < n_act; ++a) d0(p, a) = yv(a) - ycur;
  }
  sol.u0 = d0.colwise().mean().transpose();
  double pen0 = 0.0;
  for (int a = 0; a < n_act; ++a) {
    if (a == spec.space.a0_index) continue;
    pen0 += lam[a] * std::max(sol.u0(a), 0.0);
  }
  std::vector<double> r0v(r0.data(), r0.data() + m);
  MeanSe m0 = mean_se(r0v);
  xv(0) = spec.x0(0);
  sol.y0 = m0.mean + spec.running(0.0, xv, spec.space.a0_value()) * dt + n_penalty * dt * pen0;
  sol.z0 = (r0.array() - m0.mean).matrix().cwiseProduct(bundle.dw.col(0)).mean() / dt;
  inc.col(0).setConstant(pen0);

  sol.k.setZero(m, n_steps + 1);
  Vec gacc = Vec::Zero(m);
  for (int i = 0; i < n_steps; ++i) {
    sol.k.col(i + 1) = sol.k.col(i) + n_penalty * dt * inc.col(i);
    gacc += dt * inc.col(i);
  }
  sol.g_n = gacc.mean();

  // the cross-sectional spread of the step-1 fit hides regression-coefficient
  // noise shared by all paths; the pathwise representation g + int f + K_T has
  // mean Y0 and carries that shared noise, so report its se instead
  std::vector<double> rep(m);
  for (int p = 0; p < m; ++p) {
    double s = 0.0;
    for (int i = 0; i < n_steps; ++i) {
      xv(0) = bundle.x(p, i);
      s += spec.running(bundle.grid.point(i), xv, spec.action_value(bundle.act(p, i))) * dt;
    }
    xv(0) = bundle.x(p, n_steps);
    rep[p] = s + spec.terminal(xv) + sol.k(p, n_steps);
  }
  sol.y0_se = mean_se(rep).se;
  return sol;
}

BsdeGridSolution solve_penalized(const ProblemSpec& spec, int n_penalty, const TimeGrid& grid,
                                 const RegressionBasis& basis, int n_paths, std::uint64_t seed) {
  BsdeBundle bundle = make_bsde_bundle(spec, grid, n_paths, seed);
  return solve_penalized(spec, bundle, n_penalty, basis);
}

std::pair<BsdeGridSolution, ConstraintReport> solve_constrained(
    const ProblemSpec& spec, const std::vector<int>& n_schedule, double stop_tol,
    const TimeGrid& grid, const RegressionBasis& basis, int n_paths, std::uint64_t seed) {
  if (n_schedule.empty()) throw ConfigError("penalty schedule must be nonempty");
  for (std::size_t j = 0; j < n_schedule.size(); ++j) {
    if (n_schedule[j] < 0) throw ConfigError("penalty schedule must be nonnegative");
    if (j > 0 && n_schedule[j] <= n_schedule[j - 1])
      throw ConfigError("penalty schedule must be increasing");
  }
  BsdeBundle bundle = make_bsde_bundle(spec, grid, n_paths, seed);
  ConstraintReport report;
  BsdeGridSolution sol;
  double prev_y0 = 0.0, prev_se = 0.0;
  for (std::size_t j = 0; j < n_schedule.size(); ++j) {
    auto t_start = std::chrono::steady_clock::now();
    sol = solve_penalized(spec, bundle, n_schedule[j], basis);
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    report.trace.push_back({n_schedule[j], sol.y0, sol.y0_se, sol.g_n, elapsed});
    if (j > 0) {
      double comb = std::hypot(sol.y0_se, prev_se);
      if (sol.y0 < prev_y0 - 2.0 * comb) {
        std::ostringstream msg;
        msg << "Y0 decreased from " << prev_y0 << " (n=" << n_schedule[j - 1] << ") to " << sol.y0
            << " (n=" << n_schedule[j] << ") beyond two standard errors";
        report.warnings.push_back(msg.str());
      }
      double tol = stop_tol > 0.0 ? stop_tol : 1e-3 * (1.0 + std::abs(sol.y0));
      if (std::abs(sol.y0 - prev_y0) < tol) break;
    }
    prev_y0 = sol.y0;
    prev_se = sol.y0_se;
  }
  report.g_n_final = sol.g_n;
  return {std::move(sol), std::move(report)};
}

namespace {

void require_family_within(const IntensityFamily& family, int n_penalty, const std::string& op) {
  if (n_penalty < 1) throw ConfigError(op + ": penalty level must be at least 1");
  int dim = family.dim();
  for (int corner = 0; corner < (1 << dim); ++corner) {
    Vec theta(dim);
    for (int d = 0; d < dim; ++d)
      theta(d) = (corner >> d) & 1 ? family.theta_bounds[d].second : family.theta_bounds[d].first;
    IntensityField field = family.make(theta);
    if (!(field.nu_min > 0.0) || field.nu_max > n_penalty + 1e-9)
      throw ConfigError(op + ": family range must stay within (0, n_penalty]");
  }
}

}  // namespace

double representation_residual(const ProblemSpec& spec, const BsdeGridSolution& solution,
                               const IntensityFamily& family, int budget, std::uint64_t seed) {
  require_family_within(family, solution.n_penalty, "representation_residual");
  OptimizeReport opt = optimize_intensity(spec, family, solution.grid, solution.n_paths, seed,
                                          budget, "reweighted");
  return solution.y0 - opt.gain;
}

IntensityField extract_epsilon_optimal_intensity(const BsdeGridSolution& solution, double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (solution.n_penalty < 1)
    throw ConfigError("extraction needs a penalty level of at least 1");

  struct UEval {
    TimeGrid grid{1.0, 1};
    RegressionBasis basis;
    std::vector<Mat> coef_u;
    Vec u0;
    int anchor = 0;
  };
  auto ue = std::make_shared<UEval>();
  ue->grid = solution.grid;
  ue->basis = solution.basis;
  ue->coef_u = solution.coef_u;
  ue->u0 = solution.u0;
  ue->anchor = solution.spec->space.a0_index;

  double n = solution.n_penalty;
  IntensityField field;
  field.nu_min = 0.0;
  field.nu_max = n;
  field.theta = Vec::Constant(1, epsilon);
  field.evaluate = [ue, n, epsilon](double t, const Vec& x, int i, int a) {
    double u;
    if (a == i) {
      u = 0.0;  // same-mark increment vanishes identically
    } else {
      int cell = ue->grid.cell_left(t);
      int n_steps = ue->grid.n_steps();
      if (cell == 0 && (i == ue->anchor || n_steps < 2)) {
        u = ue->u0(a);
      } else {
        Vec pv;
        power_block(ue->basis, x(0), pv);
        u = dot_block(ue->coef_u[std::max(cell, 1)].col(a), i, pv);
      }
    }
    if (u >= 0.0) return n;
    if (u > -1.0) return epsilon;
    return -epsilon / u;
  };
  return field;
}

IntensityField same_mark_neutral(const IntensityField& field) {
  IntensityField out;
  auto base = field.evaluate;
  out.evaluate = [base](double t, const Vec& x, int i, int a) {
    return a == i ? 1.0 : base(t, x, i, a);
  };
  out.nu_min = std::min(field.nu_min, 1.0);
  out.nu_max = std::max(field.nu_max, 1.0);
  out.theta = field.theta;
  return out;
}

double dpp_residual(const ProblemSpec& spec, const BsdeGridSolution& solution,
                    const IntensityFamily& family, int tau_grid_index, int budget,
                    std::uint64_t seed) {
  int n_steps = solution.grid.n_steps();
  if (tau_grid_index < 0 || tau_grid_index > n_steps)
    throw ConfigError("tau must be a grid index");
  if (tau_grid_index == 0) return 0.0;  // empty integral against a deterministic Y0
  require_family_within(family, solution.n_penalty, "dpp_residual");

  const TimeGrid& grid = solution.grid;
  LiftedMeasure lifted = lift_measure(spec.space);
  double dt = grid.dt();
  int n_paths = solution.n_paths;
  auto eval_field = [&](const IntensityField& field) -> std::pair<double, double> {
    std::vector<double> vals(n_paths);
    Vec xv(1);
    for (int p = 0; p < n_paths; ++p) {
      RngStream stream = split_stream(seed, static_cast<std::uint64_t>(p));
      BrownianPath w = sample_brownian(grid, spec.dim_w, stream);
      JumpControlPath ctrl;
      ctrl.path = sample_poisson_mpp_lifted(lifted, grid.horizon(), stream);
      ctrl.a0 = spec.space.a0_index;
      StatePath path = simulate_controlled(spec, ctrl, w);
      std::vector<double> weights = girsanov_weight_trace(ctrl, spec.space, field, grid, &path.states);
      double run = 0.0;
      for (int j = 0; j < tau_grid_index; ++j) {
        xv(0) = path.states(j, 0);
        run += spec.running(grid.point(j), xv, spec.action_value(path.actions[j])) * dt;
      }
      double ytau = solution.y_value(tau_grid_index, path.states(tau_grid_index, 0),
                                     path.actions[tau_grid_index]);
      vals[p] = weights[tau_grid_index] * (run + ytau);
    }
    MeanSe ms = mean_se(vals);
    return {ms.mean, ms.se};
  };
  OptimizeReport opt = optimize_family_generic(family, budget, eval_field);
  return solution.y0 - opt.gain;
}

double mark_invariance_diagnostic(const BsdeGridSolution& solution) {
  int n_steps = solution.grid.n_steps();
  int n_act = solution.spec->space.n_actions();
  double worst = 0.0;
  for (int i = 1; i < n_steps; ++i) {
    std::vector<int> marks;
    for (int a = 0; a < n_act; ++a)
      if (solution.occupancy(i, a) >= 0.02) marks.push_back(a);
    if (marks.size() < 2) continue;
    double lo = solution.probe_range(i, 0), hi = solution.probe_range(i, 1);
    int n_probe = lo < hi ? 5 : 1;
    for (int k = 0; k < n_probe; ++k) {
      double x = n_probe == 1 ? lo : lo + (hi - lo) * k / (n_probe - 1);
      double ymin = 0.0, ymax = 0.0;
      for (std::size_t j = 0; j < marks.size(); ++j) {
        double y = solution.y_value(i, x, marks[j]);
        if (j == 0) {
          ymin = ymax = y;
        } else {
          ymin = std::min(ymin, y);
          ymax = std::max(ymax, y);
        }
      }
      worst = std::max(worst, ymax - ymin);
    }
  }
  return worst;
}

}  // namespace randcontrol
