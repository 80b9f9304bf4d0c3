#include "randcontrol/sde.hpp"

#include <cmath>
#include <sstream>

#include "randcontrol/errors.hpp"

namespace randcontrol {

void ProblemSpec::validate() const {
  if (dim_x < 1 || dim_w < 1) throw ConfigError("problem dimensions must be positive");
  if (!(horizon > 0.0)) throw ConfigError("problem horizon must be positive");
  if (x0.size() != dim_x) throw ConfigError("x0 dimension mismatch");
  if (!drift || !diffusion || !running || !terminal) throw ConfigError("problem coefficients missing");
  if (!(lipschitz_L > 0.0)) throw ConfigError("Lipschitz constant must be positive");
  if (!(growth_r >= 0.0)) throw ConfigError("growth exponent must be nonnegative");
  space.require_finite("problem spec");
}

namespace {

void check_state(const Vec& x, double t, double a_value) {
  if (!x.allFinite()) {
    std::ostringstream os;
    os << "state exploded at t=" << t << " under action " << a_value << " (|x| not finite)";
    throw NumericalError(os.str());
  }
}

template <typename ActionAtGrid>
StatePath euler_loop(const ProblemSpec& spec, const BrownianPath& w, ActionAtGrid action_at) {
  const TimeGrid& grid = w.grid;
  if (w.dim() != spec.dim_w) throw ConfigError("Brownian dimension does not match the problem");
  StatePath out;
  out.grid = grid;
  out.states.resize(grid.n_steps() + 1, spec.dim_x);
  out.actions.assign(grid.n_steps() + 1, spec.space.a0_index);
  Vec x = spec.x0;
  out.states.row(0) = x.transpose();
  out.actions[0] = action_at(0, x);
  for (int i = 0; i < grid.n_steps(); ++i) {
    double t = grid.point(i);
    int a_idx = out.actions[i];
    double a_val = spec.action_value(a_idx);
    Vec b = spec.drift(t, x, a_val);
    Mat sg = spec.diffusion(t, x, a_val);
    if (b.size() != spec.dim_x || sg.rows() != spec.dim_x || sg.cols() != spec.dim_w)
      throw ConfigError("coefficient dimensions do not match the problem");
    x += b * grid.dt() + sg * w.increments.row(i).transpose();
    check_state(x, grid.point(i + 1), a_val);
    out.states.row(i + 1) = x.transpose();
    out.actions[i + 1] = action_at(i + 1, x);
  }
  return out;
}

}  // namespace

StatePath simulate_controlled(const ProblemSpec& spec, const JumpControlPath& ctrl,
                              const BrownianPath& w) {
  spec.validate();
  // jump-driven control: the action at grid point t_i is I_{t_i}; event walk is
  // kept incremental so the loop stays linear in events + steps
  std::size_t ev_idx = 0;
  int current = ctrl.a0;
  const auto& events = ctrl.path.events;
  return euler_loop(spec, w, [&](int i, const Vec&) {
    double t = w.grid.point(i);
    while (ev_idx < events.size() && events[ev_idx].time <= t) {
      current = events[ev_idx].mark;
      ++ev_idx;
    }
    return current;
  });
}

StatePath simulate_controlled(const ProblemSpec& spec, const FeedbackControl& ctrl,
                              const BrownianPath& w) {
  spec.validate();
  return euler_loop(spec, w, [&](int i, const Vec& x) {
    int a = ctrl(w.grid.point(i), x);
    if (a < 0 || a >= spec.space.n_actions()) throw ConfigError("feedback control returned an invalid action");
    return a;
  });
}

double gain_functional(const ProblemSpec& spec, const StatePath& path) {
  double acc = 0.0;
  for (int i = 0; i < path.grid.n_steps(); ++i)
    acc += spec.running(path.grid.point(i), path.state_at(i), spec.action_value(path.actions[i])) *
           path.grid.dt();
  return acc + spec.terminal(path.state_at(path.grid.n_steps()));
}

MeanSe moment_check(const std::vector<StatePath>& ensemble, double p) {
  if (p < 2.0) throw ConfigError("moment_check needs p >= 2");
  if (ensemble.empty()) throw ConfigError("moment_check needs a nonempty ensemble");
  std::vector<double> vals(ensemble.size());
  for (std::size_t j = 0; j < ensemble.size(); ++j) {
    double sup = 0.0;
    for (int i = 0; i <= ensemble[j].grid.n_steps(); ++i)
      sup = std::max(sup, ensemble[j].states.row(i).norm());
    vals[j] = std::pow(sup, p);
  }
  return mean_se(vals);
}

}  // namespace randcontrol
