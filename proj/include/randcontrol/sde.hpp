#pragma once

#include <functional>
#include <vector>

#include "randcontrol/action_space.hpp"
#include "randcontrol/point_process.hpp"
#include "randcontrol/rng.hpp"
#include "randcontrol/stats.hpp"
#include "randcontrol/types.hpp"

namespace randcontrol {

// Controlled diffusion dX = b(t,X,a) dt + sigma(t,X,a) dW with gain
// E[ int_0^T f(t,X,a) dt + g(X_T) ]. Coefficients receive the numeric mark value.
struct ProblemSpec {
  int dim_x = 1;
  int dim_w = 1;
  double horizon = 1.0;
  Vec x0;
  ActionSpace space;
  std::function<Vec(double, const Vec&, double)> drift;      // b: dim_x
  std::function<Mat(double, const Vec&, double)> diffusion;  // sigma: dim_x x dim_w
  std::function<double(double, const Vec&, double)> running; // f
  std::function<double(const Vec&)> terminal;                // g
  double lipschitz_L = 1.0;
  double growth_r = 1.0;

  void validate() const;
  double action_value(int idx) const { return space.values.at(idx); }
};

// Euler path on the grid. actions[i] is the control index in force on
// [t_i, t_{i+1}); a jump in (t_i, t_{i+1}] therefore takes effect at t_{i+1}.
struct StatePath {
  TimeGrid grid;
  Mat states;                // (n_steps+1) x dim_x
  std::vector<int> actions;  // size n_steps+1, action at each grid point

  Vec state_at(int i) const { return states.row(i).transpose(); }
};

// Feedback control: action index as a function of (t, x), sampled at grid points.
using FeedbackControl = std::function<int(double t, const Vec& x)>;

StatePath simulate_controlled(const ProblemSpec& spec, const JumpControlPath& ctrl,
                              const BrownianPath& w);
StatePath simulate_controlled(const ProblemSpec& spec, const FeedbackControl& ctrl,
                              const BrownianPath& w);

// Left-endpoint quadrature of f plus the terminal reward along one path.
double gain_functional(const ProblemSpec& spec, const StatePath& path);

// E[ sup_t |X_t|^p ] over an ensemble; p >= 2 matches the moment bounds the
// dynamics assumptions guarantee.
MeanSe moment_check(const std::vector<StatePath>& ensemble, double p);

}  // namespace randcontrol
