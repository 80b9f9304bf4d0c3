#include "randcontrol/point_process.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "randcontrol/errors.hpp"

namespace randcontrol {

namespace {

void require_sorted(const MarkedPointPath& path, const char* who) {
  double prev = 0.0;
  for (const auto& ev : path.events) {
    if (!(ev.time > prev)) throw ConfigError(std::string(who) + ": event times must be strictly increasing");
    if (ev.time > path.horizon) throw ConfigError(std::string(who) + ": event beyond the horizon");
    prev = ev.time;
  }
}

int sample_mark_index(const ActionSpace& space, double u) {
  double target = u * space.total_mass();
  double acc = 0.0;
  for (int j = 0; j < space.n_actions(); ++j) {
    acc += space.weights[j];
    if (acc >= target) return j;
  }
  return space.n_actions() - 1;
}

}  // namespace

int JumpControlPath::action_at(double t) const {
  int act = a0;
  for (const auto& ev : path.events) {
    if (ev.time <= t)
      act = ev.mark;
    else
      break;
  }
  return act;
}

int JumpControlPath::action_left(double t) const {
  int act = a0;
  for (const auto& ev : path.events) {
    if (ev.time < t)
      act = ev.mark;
    else
      break;
  }
  return act;
}

double IntensityField::checked(double t, const Vec& x, int i, int a) const {
  double v = evaluate(t, x, i, a);
  if (!std::isfinite(v) || v <= 0.0) {
    std::ostringstream os;
    os << "intensity nonpositive or not finite at t=" << t << " i=" << i << " a=" << a;
    throw NumericalError(os.str());
  }
  const double slack = 1e-12 * (1.0 + nu_max);
  if (v < nu_min - slack || v > nu_max + slack) {
    std::ostringstream os;
    os << "intensity " << v << " violates declared bounds [" << nu_min << ", " << nu_max << "] at t=" << t
       << " i=" << i << " a=" << a;
    throw NumericalError(os.str());
  }
  return v;
}

MarkedPointPath sample_poisson_mpp(const ActionSpace& space, double horizon, RngStream& stream) {
  space.require_finite("sample_poisson_mpp");
  if (!(horizon > 0.0)) throw ConfigError("sample_poisson_mpp: horizon must be positive");
  MarkedPointPath path;
  path.horizon = horizon;
  double mass = space.total_mass();
  double t = 0.0;
  while (true) {
    t += stream.next_exponential(mass);
    if (t > horizon) break;
    MarkEvent ev;
    ev.time = t;
    ev.mark = sample_mark_index(space, stream.next_uniform());
    path.events.push_back(ev);
  }
  return path;
}

MarkedPointPath sample_poisson_mpp_lifted(const LiftedMeasure& lifted, double horizon, RngStream& stream) {
  lifted.space.require_finite("sample_poisson_mpp_lifted");
  if (!(horizon > 0.0)) throw ConfigError("sample_poisson_mpp_lifted: horizon must be positive");
  MarkedPointPath path;
  path.horizon = horizon;
  double mass = lifted.total_mass();
  double t = 0.0;
  while (true) {
    t += stream.next_exponential(mass);
    if (t > horizon) break;
    MarkEvent ev;
    ev.time = t;
    ev.lifted = lifted.quantile(stream.next_uniform());
    ev.mark = lifted.project_index(ev.lifted);
    path.events.push_back(ev);
  }
  return path;
}

namespace {

// Shared walk for the Girsanov weight: accumulates log kappa cell by cell,
// splitting each cell at its events so the i argument tracks jumps exactly.
double log_weight_to(const JumpControlPath& ctrl, const ActionSpace& space, const IntensityField& nu,
                     const TimeGrid& grid, const Mat* states, double t_stop,
                     std::vector<double>* trace) {
  space.require_finite("girsanov_weight");
  if (t_stop < 0.0 || t_stop > grid.horizon() * (1.0 + 1e-12))
    throw ConfigError("girsanov_weight: time outside [0, horizon]");
  require_sorted(ctrl.path, "girsanov_weight");
  Vec zero = Vec::Zero(states ? states->cols() : 1);

  double log_k = 0.0;
  if (trace) {
    trace->assign(grid.n_steps() + 1, 1.0);
  }
  int i_act = ctrl.a0;
  std::size_t ev_idx = 0;
  Vec xbuf = zero;
  // events at time 0 are not admitted (times live in (0, horizon])
  for (int cell = 0; cell < grid.n_steps(); ++cell) {
    double t_l = grid.point(cell);
    double t_r = std::min(grid.point(cell + 1), t_stop);
    if (t_l >= t_stop) break;
    if (states) xbuf = states->row(cell).transpose();
    const Vec& x = xbuf;
    double pos = t_l;
    while (true) {
      bool have_ev = ev_idx < ctrl.path.events.size() && ctrl.path.events[ev_idx].time <= t_r;
      double seg_end = have_ev ? ctrl.path.events[ev_idx].time : t_r;
      double drift = 0.0;  // int (1 - nu) dlambda over the segment, exact for the frozen field
      for (int a = 0; a < space.n_actions(); ++a)
        drift += (1.0 - nu.checked(t_l, x, i_act, a)) * space.weights[a];
      log_k += drift * (seg_end - pos);
      pos = seg_end;
      if (!have_ev) break;
      const MarkEvent& ev = ctrl.path.events[ev_idx];
      log_k += std::log(nu.checked(t_l, x, i_act, ev.mark));
      i_act = ev.mark;
      ++ev_idx;
      if (pos >= t_r) break;
    }
    if (trace && grid.point(cell + 1) <= t_stop) (*trace)[cell + 1] = std::exp(log_k);
  }
  return log_k;
}

}  // namespace

std::vector<double> girsanov_weight_trace(const JumpControlPath& ctrl, const ActionSpace& space,
                                          const IntensityField& nu, const TimeGrid& grid,
                                          const Mat* states) {
  std::vector<double> trace;
  log_weight_to(ctrl, space, nu, grid, states, grid.horizon(), &trace);
  return trace;
}

double girsanov_weight(const JumpControlPath& ctrl, const ActionSpace& space, const IntensityField& nu,
                       const TimeGrid& grid, const Mat* states, double t) {
  return std::exp(log_weight_to(ctrl, space, nu, grid, states, t, nullptr));
}

MeanSe compensator_residual(const std::vector<MarkedPointPath>& ensemble, const std::vector<double>* weights,
                            int a0, const ActionSpace& space, const IntensityField& nu,
                            const TimeGrid& grid, const TestField& H) {
  space.require_finite("compensator_residual");
  if (ensemble.empty()) throw ConfigError("compensator_residual: empty ensemble");
  if (weights && weights->size() != ensemble.size())
    throw ConfigError("compensator_residual: weight count mismatch");
  Vec zero = Vec::Zero(1);
  std::vector<double> diffs(ensemble.size());
  for (std::size_t p = 0; p < ensemble.size(); ++p) {
    const MarkedPointPath& path = ensemble[p];
    require_sorted(path, "compensator_residual");
    double mu_side = 0.0;
    for (std::size_t n = 0; n < path.events.size(); ++n)
      mu_side += H(path.events[n].time, path, static_cast<int>(n), path.events[n].mark);

    double nu_side = 0.0;
    int i_act = a0;
    std::size_t ev_idx = 0;
    for (int cell = 0; cell < grid.n_steps(); ++cell) {
      double t_l = grid.point(cell);
      double t_r = grid.point(cell + 1);
      double pos = t_l;
      while (true) {
        bool have_ev = ev_idx < path.events.size() && path.events[ev_idx].time <= t_r;
        double seg_end = have_ev ? path.events[ev_idx].time : t_r;
        if (seg_end > pos) {
          double mid = 0.5 * (pos + seg_end);
          for (int a = 0; a < space.n_actions(); ++a)
            nu_side += H(mid, path, static_cast<int>(ev_idx), a) * nu.checked(t_l, zero, i_act, a) *
                       space.weights[a] * (seg_end - pos);
        }
        pos = seg_end;
        if (!have_ev) break;
        i_act = path.events[ev_idx].mark;
        ++ev_idx;
        if (pos >= t_r) break;
      }
    }
    double w = weights ? (*weights)[p] : 1.0;
    diffs[p] = w * (mu_side - nu_side);
  }
  return mean_se(diffs);
}

MarkedPointPath time_change_sequence(const MarkedPointPath& base, const LiftedMeasure& lifted,
                                     const IntensityField& nu, const TimeGrid& grid,
                                     TimeChangeEnv& env, int a0) {
  lifted.space.require_finite("time_change_sequence");
  require_sorted(base, "time_change_sequence");
  if (!(nu.nu_min > 0.0) || !(nu.nu_max >= nu.nu_min) || !std::isfinite(nu.nu_max))
    throw ConfigError("time_change_sequence: intensity bounds must satisfy 0 < nu_min <= nu_max < inf");
  if (base.horizon + 1e-9 < nu.nu_max * grid.horizon())
    throw ConfigError("time_change_sequence: base path must extend to nu_max * horizon");

  const ActionSpace& space = lifted.space;
  const double mass = lifted.total_mass();
  const double tol = 1e-10 * grid.horizon();

  MarkedPointPath out;
  out.horizon = grid.horizon();
  int i_act = a0;
  int cell = 0;
  double pos = 0.0;
  double prev_base = 0.0;

  for (const MarkEvent& base_ev : base.events) {
    if (std::isnan(base_ev.lifted))
      throw ConfigError("time_change_sequence: base path lacks lifted mark coordinates");
    double remaining = base_ev.time - prev_base;
    prev_base = base_ev.time;

    bool landed = false;
    double t_new = 0.0;
    while (cell < grid.n_steps()) {
      double t_l = grid.point(cell);
      double t_r = grid.point(cell + 1);
      const Vec& x = env.state_at(cell);
      double rate = 0.0;
      for (int a = 0; a < space.n_actions(); ++a)
        rate += nu.checked(t_l, x, i_act, a) * space.weights[a];
      rate /= mass;
      double cap = rate * (t_r - pos);
      if (cap >= remaining) {
        // the clock is linear on the segment; bisection pins the crossing
        double lo = pos, hi = t_r;
        while (hi - lo > tol) {
          double midp = 0.5 * (lo + hi);
          if (rate * (midp - pos) >= remaining)
            hi = midp;
          else
            lo = midp;
        }
        t_new = 0.5 * (lo + hi);
        landed = true;
        break;
      }
      remaining -= cap;
      pos = t_r;
      ++cell;
    }
    if (!landed) return out;

    // absolute slack dominates the bisection tolerance even for early events
    if (t_new * nu.nu_max < base_ev.time - 1e-9 * (1.0 + base_ev.time))
      throw NumericalError("time_change_sequence: clock bound violated");

    // mark update: invert the nu-weighted lifted CDF at the base mark's quantile
    double t_l = grid.point(cell);
    const Vec& x = env.state_at(cell);
    double u = lifted.cdf(base_ev.lifted);
    double denom = 0.0;
    std::vector<double> seg_nu(lifted.segments.size());
    for (std::size_t s = 0; s < lifted.segments.size(); ++s) {
      seg_nu[s] = nu.checked(t_l, x, i_act, lifted.segments[s].action_index);
      denom += seg_nu[s] * lifted.segments[s].mass;
    }
    double target = u * denom;
    double acc = 0.0;
    double r_new = lifted.segments.back().right;
    int mark_new = lifted.segments.back().action_index;
    for (std::size_t s = 0; s < lifted.segments.size(); ++s) {
      double seg_mass = seg_nu[s] * lifted.segments[s].mass;
      if (acc + seg_mass >= target) {
        double frac = seg_mass > 0.0 ? (target - acc) / seg_mass : 0.0;
        r_new = lifted.segments[s].left + frac * (lifted.segments[s].right - lifted.segments[s].left);
        mark_new = lifted.segments[s].action_index;
        break;
      }
      acc += seg_mass;
    }

    MarkEvent ev;
    ev.time = t_new;
    ev.mark = mark_new;
    ev.lifted = r_new;
    out.events.push_back(ev);
    env.commit_jump(t_new, mark_new);
    i_act = mark_new;
    pos = t_new;
  }
  return out;
}

int PiecewiseControl::action_at(double t) const {
  int act = actions.front();
  for (std::size_t n = 1; n < times.size() - 1; ++n) {
    if (times[n] <= t)
      act = actions[n];
    else
      break;
  }
  return act;
}

double piecewise_distance(const std::vector<double>& break_a, const std::vector<int>& act_a,
                          const std::vector<double>& break_b, const std::vector<int>& act_b,
                          double horizon) {
  // break_* hold interior breakpoints; act_* have one more entry than breaks
  std::vector<double> cuts;
  cuts.push_back(0.0);
  for (double t : break_a)
    if (t > 0.0 && t < horizon) cuts.push_back(t);
  for (double t : break_b)
    if (t > 0.0 && t < horizon) cuts.push_back(t);
  cuts.push_back(horizon);
  std::sort(cuts.begin(), cuts.end());

  auto value_at = [](const std::vector<double>& brk, const std::vector<int>& act, double t) {
    int idx = 0;
    for (std::size_t n = 0; n < brk.size(); ++n) {
      if (brk[n] <= t)
        idx = static_cast<int>(n) + 1;
      else
        break;
    }
    return act[idx];
  };

  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double len = cuts[i + 1] - cuts[i];
    if (len <= 0.0) continue;
    double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    total += len * mark_distance(value_at(break_a, act_a, mid), value_at(break_b, act_b, mid));
  }
  return total;
}

namespace {

std::vector<int> ball_members(const ActionSpace& space, int center, int m) {
  std::vector<int> members;
  for (int a = 0; a < space.n_actions(); ++a)
    if (mark_distance(center, a) < 1.0 / static_cast<double>(m)) members.push_back(a);
  return members;
}

}  // namespace

double ApproximateControlResult::nu_hat(double t, int a, const ActionSpace& space, int m) const {
  double phi = 0.0;
  for (std::size_t n = 0; n < cascade_close.size(); ++n) {
    if (t > cascade_open[n] && t <= cascade_close[n]) {
      auto members = ball_members(space, cascade_target[n], m);
      double ball_mass = 0.0;
      bool in_ball = false;
      for (int b : members) {
        ball_mass += space.weights[b];
        if (b == a) in_ball = true;
      }
      if (in_ball) phi += cascade_rate[n] / ball_mass;
    }
  }
  return phi + nu_floor;
}

ApproximateControlResult approximate_control(const PiecewiseControl& alpha, const ActionSpace& space,
                                             int m, int k, std::uint64_t master_seed,
                                             std::uint64_t replication) {
  space.require_finite("approximate_control");
  if (m < 1 || k < 1) throw ConfigError("approximate_control: m and k must be positive integers");
  if (alpha.times.size() < 2 || alpha.actions.size() + 1 != alpha.times.size())
    throw ConfigError("approximate_control: malformed piecewise control");
  if (alpha.times.front() != 0.0) throw ConfigError("approximate_control: control must start at time 0");
  for (std::size_t n = 0; n + 1 < alpha.times.size(); ++n)
    if (!(alpha.times[n] < alpha.times[n + 1]))
      throw ConfigError("approximate_control: control times must be strictly increasing");
  for (int a : alpha.actions)
    if (a < 0 || a >= space.n_actions()) throw ConfigError("approximate_control: action outside the space");
  if (alpha.actions.front() != space.a0_index)
    throw ConfigError("approximate_control: control must start at the anchor action");

  const double horizon = alpha.times.back();
  RngStream v_stream = split_stream(master_seed, 3 * replication);
  RngStream mark_stream = split_stream(master_seed, 3 * replication + 1);
  RngStream pois_stream = split_stream(master_seed, 3 * replication + 2);

  ApproximateControlResult out;
  out.nu_floor = 1.0 / static_cast<double>(k);

  // cascade: one window per switch time, rates m * 2^n so expected lags sum to 1/m
  std::vector<MarkEvent> cascade_events;
  double lag = 0.0;
  for (std::size_t n = 1; n < alpha.actions.size(); ++n) {
    double rate = static_cast<double>(m) * std::pow(2.0, static_cast<double>(n));
    double v = v_stream.next_exponential(rate);
    double s_open = alpha.times[n] + lag;
    lag += v;
    double r_close = alpha.times[n] + lag;
    auto members = ball_members(space, alpha.actions[n], m);
    double ball_mass = 0.0;
    for (int b : members) ball_mass += space.weights[b];
    if (!(ball_mass > 0.0)) throw ConfigError("approximate_control: mark kernel ball has zero mass");
    int beta;
    if (members.size() == 1) {
      beta = members[0];
    } else {
      double u = mark_stream.next_uniform() * ball_mass;
      double acc = 0.0;
      beta = members.back();
      for (int b : members) {
        acc += space.weights[b];
        if (acc >= u) {
          beta = b;
          break;
        }
      }
    }
    out.cascade_open.push_back(s_open);
    out.cascade_close.push_back(r_close);
    out.cascade_rate.push_back(rate);
    out.cascade_target.push_back(alpha.actions[n]);
    if (r_close <= horizon) {
      MarkEvent ev;
      ev.time = r_close;
      ev.mark = beta;
      cascade_events.push_back(ev);
    }
  }

  // independent Poisson floor with compensator lambda(da) dt / k
  std::vector<MarkEvent> floor_events;
  double mass = space.total_mass();
  double t = 0.0;
  while (true) {
    t += pois_stream.next_exponential(mass / static_cast<double>(k));
    if (t > horizon) break;
    MarkEvent ev;
    ev.time = t;
    ev.mark = sample_mark_index(space, pois_stream.next_uniform());
    floor_events.push_back(ev);
  }

  MarkedPointPath merged;
  merged.horizon = horizon;
  std::merge(cascade_events.begin(), cascade_events.end(), floor_events.begin(), floor_events.end(),
             std::back_inserter(merged.events),
             [](const MarkEvent& a, const MarkEvent& b) { return a.time < b.time; });

  out.control.path = merged;
  out.control.a0 = space.a0_index;

  // empirical Krylov distances
  std::vector<double> alpha_breaks(alpha.times.begin() + 1, alpha.times.end() - 1);
  std::vector<double> merged_breaks;
  std::vector<int> merged_acts{space.a0_index};
  for (const auto& ev : merged.events) {
    merged_breaks.push_back(ev.time);
    merged_acts.push_back(ev.mark);
  }
  out.distance = piecewise_distance(merged_breaks, merged_acts, alpha_breaks, alpha.actions, horizon);

  std::vector<double> cascade_breaks;
  std::vector<int> cascade_acts{space.a0_index};
  for (const auto& ev : cascade_events) {
    cascade_breaks.push_back(ev.time);
    cascade_acts.push_back(ev.mark);
  }
  out.lag_distance = piecewise_distance(cascade_breaks, cascade_acts, alpha_breaks, alpha.actions, horizon);

  return out;
}

}  // namespace randcontrol
