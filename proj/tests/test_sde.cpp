#include <cmath>
#include <vector>

#include "doctest.h"
#include "randcontrol/sde.hpp"

using namespace randcontrol;

namespace {

// dX = a dt + sigma dW on the two-point action set {-1, +1}.
ProblemSpec drift_spec(double sigma) {
  ProblemSpec spec;
  spec.dim_x = 1;
  spec.dim_w = 1;
  spec.horizon = 1.0;
  spec.x0 = Vec::Constant(1, 0.5);
  spec.space = ActionSpace::finite({-1.0, 1.0}, {1.0, 1.0}, 0);
  spec.drift = [](double, const Vec&, double a) { return Vec::Constant(1, a); };
  spec.diffusion = [sigma](double, const Vec&, double) { return Mat::Constant(1, 1, sigma); };
  spec.running = [](double, const Vec&, double) { return 0.0; };
  spec.terminal = [](const Vec& x) { return -std::abs(x(0)); };
  spec.lipschitz_L = 1.0;
  spec.growth_r = 1.0;
  return spec;
}

BrownianPath zero_noise(const TimeGrid& grid) {
  BrownianPath w;
  w.grid = grid;
  w.increments = Mat::Zero(grid.n_steps(), 1);
  return w;
}

}  // namespace

TEST_CASE("problem validation catches malformed specs") {
  ProblemSpec spec = drift_spec(0.0);
  CHECK_NOTHROW(spec.validate());
  ProblemSpec bad = spec;
  bad.x0 = Vec::Zero(2);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.drift = nullptr;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.horizon = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("drift-only paths integrate exactly on the grid") {
  ProblemSpec spec = drift_spec(0.0);
  TimeGrid grid(1.0, 10);
  MarkedPointPath empty;
  empty.horizon = 1.0;
  JumpControlPath ctrl{empty, 1};  // constant action +1
  StatePath path = simulate_controlled(spec, ctrl, zero_noise(grid));
  REQUIRE(path.states.rows() == 11);
  CHECK(path.states(0, 0) == 0.5);
  CHECK(path.states(10, 0) == doctest::Approx(1.5).epsilon(1e-14));
  for (int i = 0; i <= 10; ++i) CHECK(path.actions[static_cast<std::size_t>(i)] == 1);
}

TEST_CASE("jumps take effect at the next grid point") {
  ProblemSpec spec = drift_spec(0.0);
  TimeGrid grid(1.0, 10);
  MarkedPointPath p;
  p.horizon = 1.0;
  p.events = {{0.34, 1, 0.0}};  // lands inside (0.3, 0.4]
  JumpControlPath ctrl{p, 0};
  StatePath path = simulate_controlled(spec, ctrl, zero_noise(grid));
  // action -1 on [0, 0.4), +1 from t_4 = 0.4 on
  for (int i = 0; i <= 3; ++i) CHECK(path.actions[static_cast<std::size_t>(i)] == 0);
  for (int i = 4; i <= 10; ++i) CHECK(path.actions[static_cast<std::size_t>(i)] == 1);
  // X_0.4 = 0.5 - 0.4, then +1 for the remaining 0.6
  CHECK(path.states(4, 0) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(path.states(10, 0) == doctest::Approx(0.7).epsilon(1e-14));

  // A jump exactly at a grid point is already in force there: it lies in
  // (t_2, t_3], so it acts from t_3.
  MarkedPointPath q;
  q.horizon = 1.0;
  q.events = {{0.3, 1, 0.0}};
  JumpControlPath ctrl2{q, 0};
  StatePath path2 = simulate_controlled(spec, ctrl2, zero_noise(grid));
  CHECK(path2.actions[2] == 0);
  CHECK(path2.actions[3] == 1);
}

TEST_CASE("euler mean recursion is exact for linear drift") {
  // dX = 0.5 X dt + 0.2 X dW: E[X_{i+1}] = E[X_i](1 + 0.5 dt), no scheme bias
  // in the mean, so the ensemble mean must hit x0 (1 + 0.5 dt)^N within 3 SE.
  ProblemSpec spec;
  spec.dim_x = 1;
  spec.dim_w = 1;
  spec.horizon = 1.0;
  spec.x0 = Vec::Constant(1, 1.0);
  spec.space = ActionSpace::finite({0.0}, {2.0}, 0);
  spec.drift = [](double, const Vec& x, double) { return Vec::Constant(1, 0.5 * x(0)); };
  spec.diffusion = [](double, const Vec& x, double) { return Mat::Constant(1, 1, 0.2 * x(0)); };
  spec.running = [](double, const Vec&, double) { return 0.0; };
  spec.terminal = [](const Vec& x) { return x(0); };
  TimeGrid grid(1.0, 50);
  RngStream stream = split_stream(200, 0);
  const int n = 40000;
  std::vector<double> xt(n);
  MarkedPointPath empty;
  empty.horizon = 1.0;
  JumpControlPath ctrl{empty, 0};
  for (int p = 0; p < n; ++p) {
    BrownianPath w = sample_brownian(grid, 1, stream);
    StatePath path = simulate_controlled(spec, ctrl, w);
    xt[static_cast<std::size_t>(p)] = path.states(50, 0);
  }
  MeanSe m = mean_se(xt);
  double ref = std::pow(1.0 + 0.5 * grid.dt(), 50);
  CHECK(std::abs(m.mean - ref) <= 3.0 * m.se);
}

TEST_CASE("feedback control is sampled at grid points") {
  ProblemSpec spec = drift_spec(0.0);
  spec.x0 = Vec::Constant(1, 2.0);
  TimeGrid grid(1.0, 100);
  FeedbackControl steer = [](double, const Vec& x) { return x(0) > 0.0 ? 0 : 1; };
  StatePath path = simulate_controlled(spec, steer, zero_noise(grid));
  // Steering toward zero from 2 at unit speed for one unit of time.
  CHECK(path.states(100, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gain_functional(spec, path) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("gain functional uses left endpoints plus terminal reward") {
  ProblemSpec spec = drift_spec(0.0);
  spec.running = [](double, const Vec&, double) { return 1.0; };
  spec.terminal = [](const Vec&) { return 0.0; };
  TimeGrid grid(1.0, 7);
  MarkedPointPath empty;
  empty.horizon = 1.0;
  JumpControlPath ctrl{empty, 0};
  StatePath path = simulate_controlled(spec, ctrl, zero_noise(grid));
  CHECK(gain_functional(spec, path) == doctest::Approx(1.0).epsilon(1e-14));

  // Time-dependent running reward: left-endpoint quadrature of t over 4 steps.
  spec.running = [](double t, const Vec&, double) { return t; };
  TimeGrid g4(1.0, 4);
  StatePath p4 = simulate_controlled(spec, ctrl, zero_noise(g4));
  // (0 + 0.25 + 0.5 + 0.75) * 0.25 = 0.375
  CHECK(gain_functional(spec, p4) == doctest::Approx(0.375).epsilon(1e-14));
}

TEST_CASE("exploding dynamics raise a numerical error") {
  ProblemSpec spec = drift_spec(0.0);
  spec.drift = [](double, const Vec& x, double) {
    return Vec::Constant(1, 1e200 * (1.0 + x(0) * x(0)));
  };
  TimeGrid grid(1.0, 10);
  MarkedPointPath empty;
  empty.horizon = 1.0;
  JumpControlPath ctrl{empty, 0};
  CHECK_THROWS_AS(simulate_controlled(spec, ctrl, zero_noise(grid)), NumericalError);
}

TEST_CASE("moment check tracks sup-norm moments") {
  ProblemSpec spec = drift_spec(0.3);
  TimeGrid grid(1.0, 20);
  RngStream stream = split_stream(201, 0);
  MarkedPointPath empty;
  empty.horizon = 1.0;
  JumpControlPath ctrl{empty, 1};
  std::vector<StatePath> ensemble;
  for (int p = 0; p < 500; ++p)
    ensemble.push_back(simulate_controlled(spec, ctrl, sample_brownian(grid, 1, stream)));
  MeanSe m = moment_check(ensemble, 2.0);
  CHECK(std::isfinite(m.mean));
  CHECK(m.mean >= 1.5 * 1.5);  // paths drift from 0.5 to ~1.5, sup >= terminal
  CHECK_THROWS_AS(moment_check(ensemble, 1.0), ConfigError);
}
