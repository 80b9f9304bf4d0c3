#include <cmath>
#include <vector>

#include "doctest.h"
#include "randcontrol/oracles.hpp"
#include "randcontrol/randomized.hpp"

using namespace randcontrol;

namespace {

IntensityField const_field(double c, double lo, double hi) {
  IntensityField nu;
  nu.evaluate = [c](double, const Vec&, int, int) { return c; };
  nu.nu_min = lo;
  nu.nu_max = hi;
  nu.theta = Vec::Constant(1, c);
  return nu;
}

}  // namespace

TEST_CASE("euler co-simulation matches the batch simulator event for event") {
  BenchmarkSpec bench = make_benchmark("bangbang", 0.5);
  ProblemSpec spec = bench.problem;
  spec.diffusion = [](double, const Vec&, double) { return Mat::Constant(1, 1, 0.4); };
  TimeGrid grid(1.0, 16);
  RngStream stream = split_stream(400, 0);
  for (int rep = 0; rep < 20; ++rep) {
    BrownianPath w = sample_brownian(grid, 1, stream);
    MarkedPointPath events;
    events.horizon = 1.0;
    events.events = {{0.13, 1, 0.0}, {0.66, 0, 0.0}, {0.91, 1, 0.0}};

    EulerEnv env(spec, w);
    // interleave state queries with commits the way the time change does:
    // each jump is committed after querying at most its own cell
    env.state_at(2);
    env.commit_jump(0.13, 1);
    env.state_at(5);
    env.state_at(10);
    env.commit_jump(0.66, 0);
    env.state_at(14);
    env.commit_jump(0.91, 1);
    StatePath from_env = env.finish();

    JumpControlPath ctrl{events, spec.space.a0_index};
    StatePath batch = simulate_controlled(spec, ctrl, w);
    REQUIRE(from_env.states.rows() == batch.states.rows());
    for (int i = 0; i <= 16; ++i) {
      CHECK(from_env.states(i, 0) == batch.states(i, 0));
      CHECK(from_env.actions[static_cast<std::size_t>(i)] ==
            batch.actions[static_cast<std::size_t>(i)]);
    }
  }

  // committing a jump behind the advanced frontier violates causality
  BrownianPath w = sample_brownian(grid, 1, stream);
  EulerEnv env(spec, w);
  env.state_at(10);
  CHECK_THROWS_AS(env.commit_jump(0.3, 1), NumericalError);
}

TEST_CASE("reweighted estimator under the identity field is plain averaging") {
  BenchmarkSpec bench = make_benchmark("bangbang", 0.5);
  TimeGrid grid(1.0, 20);
  IntensityField one = const_field(1.0, 1.0, 1.0);
  std::vector<RandomizedPathBundle> bundles;
  RandomizedGainReport rep = randomized_gain_reweighted(bench.problem, one, grid, 500, 7, &bundles);
  CHECK(rep.n_paths == 500);
  CHECK(rep.weight_cv == doctest::Approx(0.0).epsilon(1e-12));
  REQUIRE(bundles.size() == 500);
  for (const auto& b : bundles) {
    CHECK(b.weight_trace.front() == 1.0);
    CHECK(b.weight_trace.back() == doctest::Approx(1.0).epsilon(1e-12));
  }
  // gain equals the unweighted mean of the functionals
  std::vector<double> f;
  for (const auto& b : bundles) f.push_back(b.functional);
  MeanSe plain = mean_se(f);
  CHECK(rep.gain.mean == doctest::Approx(plain.mean).epsilon(1e-12));
}

TEST_CASE("direct and reweighted estimators coincide pathwise at unit intensity") {
  // With nu = 1 the time change is the identity and both estimators consume
  // the same draws, so the estimates agree to the bisection tolerance.
  BenchmarkSpec bench = make_benchmark("bangbang", 0.5);
  TimeGrid grid(1.0, 20);
  IntensityField one = const_field(1.0, 1.0, 1.0);
  RandomizedGainReport rw = randomized_gain_reweighted(bench.problem, one, grid, 400, 11);
  RandomizedGainReport dr = randomized_gain_direct(bench.problem, one, grid, 400, 11);
  CHECK(rw.gain.mean == doctest::Approx(dr.gain.mean).epsilon(1e-9));
  CHECK(rw.gain.se == doctest::Approx(dr.gain.se).epsilon(1e-6));
}

TEST_CASE("direct and reweighted estimators target the same law") {
  BenchmarkSpec bench = make_benchmark("bangbang", 1.0);
  ProblemSpec spec = bench.problem;
  spec.diffusion = [](double, const Vec&, double) { return Mat::Constant(1, 1, 0.2); };
  TimeGrid grid(1.0, 25);
  IntensityField nu;
  nu.evaluate = [](double, const Vec& x, int, int a) {
    // favor the mark matching -sign(x)
    double toward = x(0) > 0.0 ? (a == 0 ? 1.6 : 0.6) : (a == 1 ? 1.6 : 0.6);
    return toward;
  };
  nu.nu_min = 0.6;
  nu.nu_max = 1.6;
  RandomizedGainReport rw = randomized_gain_reweighted(spec, nu, grid, 30000, 13);
  RandomizedGainReport dr = randomized_gain_direct(spec, nu, grid, 30000, 14);
  double gap = std::abs(rw.gain.mean - dr.gain.mean);
  double band = 3.0 * std::hypot(rw.gain.se, dr.gain.se);
  CHECK(gap <= band);
  CHECK(rw.weight_cv > 0.0);
}

TEST_CASE("intensity families respect their declared bounds") {
  ActionSpace space = ActionSpace::finite({-1.0, 1.0}, {1.0, 1.0}, 0);
  CHECK_THROWS_AS(make_family("nope", space, 4.0), ConfigError);

  for (const char* name : {"const", "sign_correcting", "policy_greedy"}) {
    IntensityFamily fam = make_family(name, space, 4.0);
    CHECK(fam.dim() >= 1);
    // corners of the theta box must produce fields within bounds everywhere
    for (int corner = 0; corner < (1 << fam.dim()); ++corner) {
      Vec theta(fam.dim());
      for (int d = 0; d < fam.dim(); ++d)
        theta(d) = (corner >> d) & 1 ? fam.theta_bounds[static_cast<std::size_t>(d)].second
                                     : fam.theta_bounds[static_cast<std::size_t>(d)].first;
      IntensityField nu = fam.make(theta);
      for (double t : {0.0, 0.5})
        for (double x : {-2.0, 0.0, 0.7})
          for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a) {
              double v = nu.checked(t, Vec::Constant(1, x), i, a);
              CHECK(v >= nu.nu_min - 1e-12);
              CHECK(v <= nu.nu_max + 1e-12);
            }
    }
  }

  IntensityFamily cf = make_family("const", space, 4.0);
  IntensityField nu = cf.make(Vec::Constant(1, 2.5));
  CHECK(nu.evaluate(0.3, Vec::Zero(1), 0, 1) == doctest::Approx(2.5));
}

TEST_CASE("sign correcting family boosts only the corrective mark") {
  ActionSpace space = ActionSpace::finite({-1.0, 1.0}, {1.0, 1.0}, 0);
  IntensityFamily fam = make_family("sign_correcting", space, 4.0);
  Vec theta(2);
  theta << 3.0, 0.1;  // rate, band
  IntensityField nu = fam.make(theta);
  Vec pos = Vec::Constant(1, 1.0), neg = Vec::Constant(1, -1.0), mid = Vec::Constant(1, 0.0);
  // x > band: desired mark is index 0 (value -1)
  CHECK(nu.evaluate(0.0, pos, 1, 0) == doctest::Approx(3.0));
  CHECK(nu.evaluate(0.0, pos, 0, 0) == doctest::Approx(1.0));  // already there
  CHECK(nu.evaluate(0.0, pos, 0, 1) == doctest::Approx(1.0));
  // x < -band: desired mark is index 1
  CHECK(nu.evaluate(0.0, neg, 0, 1) == doctest::Approx(3.0));
  // inside the band nothing is boosted
  CHECK(nu.evaluate(0.0, mid, 0, 1) == doctest::Approx(1.0));
}

TEST_CASE("optimizer improves on the identity field and respects its budget") {
  BenchmarkSpec bench = make_benchmark("bangbang", 2.0);
  TimeGrid grid(1.0, 50);
  ActionSpace space = bench.problem.space;
  IntensityFamily fam = make_family("sign_correcting", space, 8.0);
  OptimizeReport rep = optimize_intensity(bench.problem, fam, grid, 4000, 23, 30, "reweighted");
  CHECK(static_cast<int>(rep.trace.size()) <= 30);
  CHECK(rep.estimator == "reweighted");
  CHECK(rep.weight_cv_max > 0.0);

  IntensityField one = const_field(1.0, 1.0, 1.0);
  RandomizedGainReport base = randomized_gain_reweighted(bench.problem, one, grid, 4000, 23);
  CHECK(rep.gain >= base.gain.mean - 2.0 * std::hypot(rep.se, base.gain.se));
  // Steering toward the origin from x0=2 should clearly beat passive jumping.
  CHECK(rep.gain > base.gain.mean);

  // Tiny budget: the search stops early and flags it.
  OptimizeReport tight = optimize_intensity(bench.problem, fam, grid, 500, 23, 3, "reweighted");
  CHECK(static_cast<int>(tight.trace.size()) <= 3);
  CHECK(tight.budget_exhausted);
}

TEST_CASE("optimizer is deterministic under common random numbers") {
  BenchmarkSpec bench = make_benchmark("bangbang", 0.5);
  TimeGrid grid(1.0, 20);
  IntensityFamily fam = make_family("const", bench.problem.space, 3.0);
  OptimizeReport a = optimize_intensity(bench.problem, fam, grid, 800, 31, 12, "direct");
  OptimizeReport b = optimize_intensity(bench.problem, fam, grid, 800, 31, 12, "direct");
  CHECK(a.gain == b.gain);
  CHECK(a.theta(0) == b.theta(0));
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) CHECK(a.trace[k].gain == b.trace[k].gain);
}

TEST_CASE("estimator argument is validated") {
  BenchmarkSpec bench = make_benchmark("bangbang", 0.5);
  TimeGrid grid(1.0, 10);
  IntensityFamily fam = make_family("const", bench.problem.space, 2.0);
  CHECK_THROWS_AS(optimize_intensity(bench.problem, fam, grid, 100, 1, 4, "nonsense"), ConfigError);
}
