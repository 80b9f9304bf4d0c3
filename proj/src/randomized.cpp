#include "randcontrol/randomized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "randcontrol/errors.hpp"

namespace randcontrol {

EulerEnv::EulerEnv(const ProblemSpec& spec, const BrownianPath& w)
    : spec_(spec), w_(w), current_action_(spec.space.a0_index) {
  trace_.grid = w.grid;
  trace_.states.resize(w.grid.n_steps() + 1, spec.dim_x);
  trace_.actions.assign(w.grid.n_steps() + 1, spec.space.a0_index);
  trace_.states.row(0) = spec.x0.transpose();
  committed_.horizon = w.grid.horizon();
  x_buf_ = spec.x0;
}

void EulerEnv::advance_to(int grid_index) {
  const TimeGrid& grid = trace_.grid;
  while (frontier_ < grid_index) {
    int i = frontier_;
    double t = grid.point(i);
    int a_idx = trace_.actions[i];
    double a_val = spec_.action_value(a_idx);
    Vec x = trace_.states.row(i).transpose();
    Vec b = spec_.drift(t, x, a_val);
    Mat sg = spec_.diffusion(t, x, a_val);
    x += b * grid.dt() + sg * w_.increments.row(i).transpose();
    if (!x.allFinite()) throw NumericalError("time-change co-simulation state exploded");
    trace_.states.row(i + 1) = x.transpose();
    // control at the next grid point: latest committed mark with time <= t_{i+1}
    double t_next = grid.point(i + 1);
    for (const auto& ev : committed_.events)
      if (ev.time <= t_next) current_action_ = ev.mark;
    trace_.actions[i + 1] = current_action_;
    ++frontier_;
  }
}

const Vec& EulerEnv::state_at(int grid_index) {
  advance_to(grid_index);
  x_buf_ = trace_.states.row(grid_index).transpose();
  return x_buf_;
}

void EulerEnv::commit_jump(double t, int mark) {
  // a jump at t first shows up in the action slot at the next grid point; that
  // slot must not have been advanced past already
  const TimeGrid& grid = trace_.grid;
  int cl = grid.cell_left(t);
  int first_affected = grid.point(cl) == t ? cl : cl + 1;
  if (t <= grid.horizon() && first_affected <= frontier_)
    throw NumericalError("time-change co-simulation received a jump behind the frontier");
  committed_.events.push_back({t, mark, 0.0});
}

StatePath EulerEnv::finish() {
  advance_to(trace_.grid.n_steps());
  return trace_;
}

RandomizedGainReport randomized_gain_reweighted(const ProblemSpec& spec, const IntensityField& nu,
                                                const TimeGrid& grid, int n_paths, std::uint64_t seed,
                                                std::vector<RandomizedPathBundle>* keep) {
  spec.validate();
  if (n_paths < 1) throw ConfigError("randomized gain needs at least one path");
  LiftedMeasure lifted = lift_measure(spec.space);
  std::vector<double> vals(n_paths), kappas(n_paths);
  if (keep) keep->resize(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    RngStream stream = split_stream(seed, static_cast<std::uint64_t>(p));
    BrownianPath w = sample_brownian(grid, spec.dim_w, stream);
    JumpControlPath ctrl;
    ctrl.path = sample_poisson_mpp_lifted(lifted, grid.horizon(), stream);
    ctrl.a0 = spec.space.a0_index;
    StatePath path = simulate_controlled(spec, ctrl, w);
    std::vector<double> weights = girsanov_weight_trace(ctrl, spec.space, nu, grid, &path.states);
    double functional = gain_functional(spec, path);
    kappas[p] = weights.back();
    vals[p] = kappas[p] * functional;
    if (keep) {
      (*keep)[p].state = std::move(path);
      (*keep)[p].control = std::move(ctrl);
      (*keep)[p].weight_trace = std::move(weights);
      (*keep)[p].functional = functional;
    }
  }
  RandomizedGainReport out;
  out.gain = mean_se(vals);
  out.n_paths = n_paths;
  MeanSe km = mean_se(kappas);
  double sd = km.se * std::sqrt(static_cast<double>(n_paths));
  out.weight_cv = km.mean != 0.0 ? sd / std::abs(km.mean) : 0.0;
  return out;
}

RandomizedGainReport randomized_gain_direct(const ProblemSpec& spec, const IntensityField& nu,
                                            const TimeGrid& grid, int n_paths, std::uint64_t seed) {
  spec.validate();
  if (n_paths < 1) throw ConfigError("randomized gain needs at least one path");
  LiftedMeasure lifted = lift_measure(spec.space);
  double base_horizon = std::max(nu.nu_max, 1.0) * grid.horizon();
  std::vector<double> vals(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    RngStream stream = split_stream(seed, static_cast<std::uint64_t>(p));
    BrownianPath w = sample_brownian(grid, spec.dim_w, stream);
    MarkedPointPath base = sample_poisson_mpp_lifted(lifted, base_horizon, stream);
    EulerEnv env(spec, w);
    time_change_sequence(base, lifted, nu, grid, env, spec.space.a0_index);
    StatePath path = env.finish();
    vals[p] = gain_functional(spec, path);
  }
  RandomizedGainReport out;
  out.gain = mean_se(vals);
  out.n_paths = n_paths;
  out.weight_cv = 0.0;
  return out;
}

namespace {

int nearest_action(const std::vector<double>& values, double target) {
  int best = 0;
  double bd = std::abs(values[0] - target);
  for (std::size_t j = 1; j < values.size(); ++j) {
    double d = std::abs(values[j] - target);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace

IntensityFamily make_family(const std::string& name, const ActionSpace& space, double nu_max) {
  space.require_finite("make_family");
  if (!(nu_max >= 1.0)) throw ConfigError("family nu_max must be at least 1");
  IntensityFamily fam;
  fam.name = name;

  if (name == "const") {
    fam.theta_bounds = {{1e-6, nu_max}};
    fam.make = [](const Vec& theta) {
      double c = theta(0);
      IntensityField f;
      f.evaluate = [c](double, const Vec&, int, int) { return c; };
      f.nu_min = c;
      f.nu_max = c;
      f.theta = theta;
      return f;
    };
    return fam;
  }

  if (name == "sign_correcting") {
    int idx_min = 0, idx_max = 0;
    for (int j = 1; j < space.n_actions(); ++j) {
      if (space.values[j] < space.values[idx_min]) idx_min = j;
      if (space.values[j] > space.values[idx_max]) idx_max = j;
    }
    fam.theta_bounds = {{1.0, nu_max}, {0.005, 1.0}};
    fam.make = [idx_min, idx_max](const Vec& theta) {
      double rate = theta(0), band = theta(1);
      IntensityField f;
      f.evaluate = [rate, band, idx_min, idx_max](double, const Vec& x, int i, int a) {
        int desired = -1;
        if (x(0) > band)
          desired = idx_min;
        else if (x(0) < -band)
          desired = idx_max;
        return (desired >= 0 && a == desired && i != desired) ? rate : 1.0;
      };
      f.nu_min = 1.0;
      f.nu_max = std::max(rate, 1.0);
      f.theta = theta;
      return f;
    };
    return fam;
  }

  if (name == "policy_greedy") {
    auto values = space.values;
    double vmin = *std::min_element(values.begin(), values.end());
    double vmax = *std::max_element(values.begin(), values.end());
    fam.theta_bounds = {{0.0, 10.0}, {1.0, nu_max}};
    fam.make = [values, vmin, vmax](const Vec& theta) {
      double gain_g = theta(0), rate = theta(1);
      IntensityField f;
      f.evaluate = [values, vmin, vmax, gain_g, rate](double, const Vec& x, int i, int a) {
        double target = std::min(std::max(-gain_g * x(0), vmin), vmax);
        int desired = nearest_action(values, target);
        return (a == desired && i != desired) ? rate : 1.0;
      };
      f.nu_min = 1.0;
      f.nu_max = std::max(rate, 1.0);
      f.theta = theta;
      return f;
    };
    return fam;
  }

  throw ConfigError("unknown intensity family '" + name + "'");
}

OptimizeReport optimize_family_generic(
    const IntensityFamily& family, int budget,
    const std::function<std::pair<double, double>(const IntensityField&)>& eval_field) {
  if (budget < 1) throw ConfigError("optimizer budget must be positive");
  int dim = family.dim();
  if (dim < 1) throw ConfigError("intensity family must have parameters");

  OptimizeReport report;

  std::map<std::vector<double>, std::pair<double, double>> cache;
  int evals = 0;
  auto evaluate = [&](const Vec& theta) -> std::pair<double, double> {
    std::vector<double> key(theta.data(), theta.data() + theta.size());
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    if (evals >= budget) {
      report.budget_exhausted = true;
      return {-std::numeric_limits<double>::infinity(), 0.0};
    }
    ++evals;
    IntensityField field = family.make(theta);
    auto res = eval_field(field);
    report.trace.push_back({theta, res.first, res.second});
    cache[key] = res;
    return res;
  };

  // coarse factorial sweep
  int k = dim == 1 ? 7 : 4;
  while (std::pow(k, dim) > std::max(1, budget / 2) && k > 2) --k;
  std::vector<double> step(dim);
  Vec theta(dim);
  Vec best_theta(dim);
  double best_gain = -std::numeric_limits<double>::infinity();
  double best_se = 0.0;
  std::vector<int> idx(dim, 0);
  bool done = false;
  while (!done) {
    for (int d = 0; d < dim; ++d) {
      auto [lo, hi] = family.theta_bounds[d];
      theta(d) = k == 1 ? lo : lo + (hi - lo) * idx[d] / (k - 1);
    }
    auto [g, s] = evaluate(theta);
    if (g > best_gain) {
      best_gain = g;
      best_se = s;
      best_theta = theta;
    }
    int d = 0;
    while (d < dim && ++idx[d] == k) idx[d++] = 0;
    done = d == dim;
  }

  // local refinement: halve the step around the incumbent
  for (int d = 0; d < dim; ++d) {
    auto [lo, hi] = family.theta_bounds[d];
    step[d] = k > 1 ? (hi - lo) / (k - 1) : (hi - lo);
  }
  for (int round = 0; round < 3 && !report.budget_exhausted; ++round) {
    for (int d = 0; d < dim; ++d) step[d] *= 0.5;
    bool improved = true;
    while (improved && !report.budget_exhausted) {
      improved = false;
      for (int d = 0; d < dim; ++d) {
        for (double dir : {-1.0, 1.0}) {
          Vec cand = best_theta;
          auto [lo, hi] = family.theta_bounds[d];
          cand(d) = std::min(std::max(cand(d) + dir * step[d], lo), hi);
          auto [g, s] = evaluate(cand);
          if (g > best_gain) {
            best_gain = g;
            best_se = s;
            best_theta = cand;
            improved = true;
          }
        }
      }
    }
  }

  report.theta = best_theta;
  report.gain = best_gain;
  report.se = best_se;
  return report;
}

OptimizeReport optimize_intensity(const ProblemSpec& spec, const IntensityFamily& family,
                                  const TimeGrid& grid, int n_paths, std::uint64_t seed, int budget,
                                  const std::string& estimator) {
  if (estimator != "reweighted" && estimator != "direct")
    throw ConfigError("estimator must be 'reweighted' or 'direct'");
  double cv_max = 0.0;
  auto eval_field = [&](const IntensityField& field) -> std::pair<double, double> {
    RandomizedGainReport r = estimator == "direct"
                                 ? randomized_gain_direct(spec, field, grid, n_paths, seed)
                                 : randomized_gain_reweighted(spec, field, grid, n_paths, seed);
    cv_max = std::max(cv_max, r.weight_cv);
    return {r.gain.mean, r.gain.se};
  };
  OptimizeReport report = optimize_family_generic(family, budget, eval_field);
  report.estimator = estimator;
  report.weight_cv_max = cv_max;
  return report;
}

}  // namespace randcontrol
