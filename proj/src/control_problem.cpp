#include "randcontrol/control_problem.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "randcontrol/errors.hpp"

namespace randcontrol {

int SimpleControl::bin_of(double x) const {
  int b = 0;
  for (double e : bin_edges)
    if (x > e) ++b;
  return b;
}

void SimpleControl::validate(const ProblemSpec& spec) const {
  if (times.size() < 2) throw ConfigError("simple control needs at least one interval");
  if (times.front() != 0.0) throw ConfigError("simple control must start at time 0");
  for (std::size_t n = 0; n + 1 < times.size(); ++n)
    if (!(times[n] < times[n + 1])) throw ConfigError("simple control times must be strictly increasing");
  if (std::abs(times.back() - spec.horizon) > 1e-9 * (1.0 + spec.horizon))
    throw ConfigError("simple control must end at the horizon");
  if (!std::is_sorted(bin_edges.begin(), bin_edges.end()))
    throw ConfigError("simple control bin edges must be sorted");
  if (static_cast<int>(policy.size()) != n_intervals())
    throw ConfigError("simple control policy must cover every interval");
  for (const auto& row : policy) {
    if (static_cast<int>(row.size()) != n_bins())
      throw ConfigError("simple control policy must cover every bin");
    for (int a : row)
      if (a < 0 || a >= spec.space.n_actions())
        throw ConfigError("simple control refers to an action outside the space");
  }
}

FeedbackControl SimpleControl::make_policy() const {
  // per-path state: the interval currently frozen and its chosen action
  auto last_interval = std::make_shared<int>(-1);
  auto frozen = std::make_shared<int>(policy.front().front());
  auto times_c = times;
  auto edges_c = bin_edges;
  auto policy_c = policy;
  return [last_interval, frozen, times_c, edges_c, policy_c](double t, const Vec& x) {
    int n = 0;
    for (std::size_t j = 1; j + 1 < times_c.size(); ++j)
      if (times_c[j] <= t + 1e-12) n = static_cast<int>(j);
    if (n != *last_interval) {
      *last_interval = n;
      int b = 0;
      for (double e : edges_c)
        if (x(0) > e) ++b;
      *frozen = policy_c[n][b];
    }
    return *frozen;
  };
}

MeanSe gain(const ProblemSpec& spec, const SimpleControl& ctrl, const TimeGrid& grid, int n_paths,
            std::uint64_t seed) {
  spec.validate();
  ctrl.validate(spec);
  if (n_paths < 1) throw ConfigError("gain needs at least one path");
  std::vector<double> vals(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    RngStream stream = split_stream(seed, static_cast<std::uint64_t>(p));
    BrownianPath w = sample_brownian(grid, spec.dim_w, stream);
    StatePath path = simulate_controlled(spec, ctrl.make_policy(), w);
    vals[p] = gain_functional(spec, path);
  }
  return mean_se(vals);
}

MeanSe control_distance(const ProblemSpec& spec, const SimpleControl& a, const SimpleControl& b,
                        const TimeGrid& grid, int n_paths, std::uint64_t seed) {
  spec.validate();
  a.validate(spec);
  b.validate(spec);
  if (n_paths < 1) throw ConfigError("control_distance needs at least one path");
  std::vector<double> vals(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    RngStream stream = split_stream(seed, static_cast<std::uint64_t>(p));
    BrownianPath w = sample_brownian(grid, spec.dim_w, stream);
    StatePath drive = simulate_controlled(spec, a.make_policy(), w);
    // evaluate both policies along the common driving path
    auto pol_a = a.make_policy();
    auto pol_b = b.make_policy();
    double acc = 0.0;
    for (int i = 0; i < grid.n_steps(); ++i) {
      Vec x = drive.state_at(i);
      int ai = pol_a(grid.point(i), x);
      int bi = pol_b(grid.point(i), x);
      acc += mark_distance(ai, bi) * grid.dt();
    }
    vals[p] = acc;
  }
  return mean_se(vals);
}

namespace {

double interp_clamped(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  double w = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
  return (1.0 - w) * ys[hi - 1] + w * ys[hi];
}

BruteForceReport brute_enumerate(const ProblemSpec& spec, const TimeGrid& grid,
                                 const BruteForceOptions& opt, const std::vector<int>& actions) {
  int m = static_cast<int>(opt.times.size()) - 1;
  int bins = static_cast<int>(opt.bin_edges.size()) + 1;
  int slots = m * bins;
  double count_d = std::pow(static_cast<double>(actions.size()), slots);
  if (count_d > static_cast<double>(opt.enumeration_cap))
    throw ConfigError("enumeration space exceeds the configured cap; use backward mode");
  long count = static_cast<long>(count_d);

  BruteForceReport best;
  best.value = -std::numeric_limits<double>::infinity();
  best.policies_searched = count;
  std::vector<int> digits(slots, 0);
  for (long idx = 0; idx < count; ++idx) {
    SimpleControl ctrl;
    ctrl.times = opt.times;
    ctrl.bin_edges = opt.bin_edges;
    ctrl.policy.assign(m, std::vector<int>(bins, 0));
    long rem = idx;
    for (int s = 0; s < slots; ++s) {
      ctrl.policy[s / bins][s % bins] = actions[rem % actions.size()];
      rem /= static_cast<long>(actions.size());
    }
    MeanSe est = gain(spec, ctrl, grid, opt.n_paths, opt.seed);
    if (est.mean > best.value) {
      best.value = est.mean;
      best.se = est.se;
      best.argmax = ctrl;
    }
  }
  return best;
}

BruteForceReport brute_backward(const ProblemSpec& spec, const TimeGrid& grid,
                                const BruteForceOptions& opt, const std::vector<int>& actions) {
  if (spec.dim_x != 1 || spec.dim_w != 1)
    throw ConfigError("backward brute force supports scalar problems");
  if (opt.centers.size() < 2) throw ConfigError("backward brute force needs bin centers");
  if (!std::is_sorted(opt.centers.begin(), opt.centers.end()))
    throw ConfigError("bin centers must be sorted");

  int m = static_cast<int>(opt.times.size()) - 1;
  std::vector<int> grid_idx(opt.times.size());
  for (std::size_t n = 0; n < opt.times.size(); ++n) {
    double pos = opt.times[n] / grid.dt();
    int gi = static_cast<int>(std::lround(pos));
    if (std::abs(opt.times[n] - grid.point(gi)) > 1e-9 * (1.0 + grid.horizon()))
      throw ConfigError("subdivision times must lie on the simulation grid");
    grid_idx[n] = gi;
  }

  std::size_t nc = opt.centers.size();
  std::vector<double> value(nc), next(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    Vec x(1);
    x(0) = opt.centers[c];
    next[c] = spec.terminal(x);
  }

  BruteForceReport report;
  report.argmax.times = opt.times;
  report.argmax.bin_edges.clear();
  for (std::size_t c = 0; c + 1 < nc; ++c)
    report.argmax.bin_edges.push_back(0.5 * (opt.centers[c] + opt.centers[c + 1]));
  report.argmax.policy.assign(m, std::vector<int>(nc, actions.front()));
  double root_se = 0.0;

  for (int n = m - 1; n >= 0; --n) {
    int gi0 = grid_idx[n], gi1 = grid_idx[n + 1];
    int steps = gi1 - gi0;
    RngStream stream = split_stream(opt.seed, 1000 + static_cast<std::uint64_t>(n));
    Mat z(opt.n_inner, steps);
    for (int r = 0; r < opt.n_inner; ++r)
      for (int s = 0; s < steps; ++s) z(r, s) = stream.next_normal();
    double sd = std::sqrt(grid.dt());

    for (std::size_t c = 0; c < nc; ++c) {
      double best_val = -std::numeric_limits<double>::infinity();
      double best_se = 0.0;
      int best_act = actions.front();
      for (int a : actions) {
        double a_val = spec.action_value(a);
        std::vector<double> samples(opt.n_inner);
        for (int r = 0; r < opt.n_inner; ++r) {
          double x = opt.centers[c];
          double acc = 0.0;
          for (int s = 0; s < steps; ++s) {
            double t = grid.point(gi0 + s);
            Vec xv(1);
            xv(0) = x;
            acc += spec.running(t, xv, a_val) * grid.dt();
            double b = spec.drift(t, xv, a_val)(0);
            double sig = spec.diffusion(t, xv, a_val)(0, 0);
            x += b * grid.dt() + sig * sd * z(r, s);
            if (!std::isfinite(x)) throw NumericalError("backward brute force state exploded");
          }
          samples[r] = acc + interp_clamped(opt.centers, next, x);
        }
        MeanSe ms = mean_se(samples);
        if (ms.mean > best_val) {
          best_val = ms.mean;
          best_se = ms.se;
          best_act = a;
        }
      }
      value[c] = best_val;
      report.argmax.policy[n][c] = best_act;
      report.policies_searched += static_cast<long>(actions.size());
      if (n == 0) root_se = std::max(root_se, best_se);
    }
    std::swap(value, next);
  }

  report.value = interp_clamped(opt.centers, next, spec.x0(0));
  report.se = root_se;
  return report;
}

}  // namespace

BruteForceReport value_brute_force(const ProblemSpec& spec, const TimeGrid& grid,
                                   const BruteForceOptions& opt) {
  spec.validate();
  if (opt.times.size() < 2 || opt.times.front() != 0.0 ||
      std::abs(opt.times.back() - spec.horizon) > 1e-9 * (1.0 + spec.horizon))
    throw ConfigError("brute force subdivision must span [0, horizon]");
  std::vector<int> actions = opt.action_grid;
  if (actions.empty())
    for (int a = 0; a < spec.space.n_actions(); ++a) actions.push_back(a);
  for (int a : actions)
    if (a < 0 || a >= spec.space.n_actions()) throw ConfigError("action grid outside the space");

  if (opt.mode == "enumerate") return brute_enumerate(spec, grid, opt, actions);
  if (opt.mode == "backward") return brute_backward(spec, grid, opt, actions);
  throw ConfigError("brute force mode must be 'enumerate' or 'backward'");
}

}  // namespace randcontrol
