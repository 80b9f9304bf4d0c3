#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "randcontrol/control_problem.hpp"
#include "randcontrol/point_process.hpp"
#include "randcontrol/sde.hpp"

namespace randcontrol {

// One simulated path of the randomized system under the base Poisson measure.
struct RandomizedPathBundle {
  StatePath state;
  JumpControlPath control;
  std::vector<double> weight_trace;  // Girsanov weights at grid points, [0] = 1
  double functional = 0.0;           // unweighted int f dt + g(X_T)
};

struct RandomizedGainReport {
  MeanSe gain;
  double weight_cv = 0.0;  // coefficient of variation of the terminal weights
  int n_paths = 0;
};

// Importance-sampling estimator E[kappa_T * (int f + g)] under the base measure.
// Optionally keeps the per-path bundles for diagnostics.
RandomizedGainReport randomized_gain_reweighted(const ProblemSpec& spec, const IntensityField& nu,
                                                const TimeGrid& grid, int n_paths, std::uint64_t seed,
                                                std::vector<RandomizedPathBundle>* keep = nullptr);

// Unweighted estimator: simulates the jump control directly under the target
// intensity via the time-change construction, co-evolving the state. Same base
// randomness per path index as the reweighted estimator.
RandomizedGainReport randomized_gain_direct(const ProblemSpec& spec, const IntensityField& nu,
                                            const TimeGrid& grid, int n_paths, std::uint64_t seed);

// Euler co-simulation environment used by the time change: jumps committed at
// time t change the control from the next grid point after t.
class EulerEnv : public TimeChangeEnv {
 public:
  EulerEnv(const ProblemSpec& spec, const BrownianPath& w);

  const Vec& state_at(int grid_index) override;
  void commit_jump(double t, int mark) override;

  // Completes the trajectory to the grid end and returns it together with the
  // accumulated control path.
  StatePath finish();
  const MarkedPointPath& committed() const { return committed_; }

 private:
  void advance_to(int grid_index);

  const ProblemSpec& spec_;
  const BrownianPath& w_;
  StatePath trace_;
  MarkedPointPath committed_;
  int frontier_ = 0;  // last grid index with a computed state
  int current_action_;
  Vec x_buf_;
};

// Named parametric intensity family; `make` must accept any theta within bounds.
struct IntensityFamily {
  std::string name;
  std::vector<std::pair<double, double>> theta_bounds;
  std::function<IntensityField(const Vec& theta)> make;

  int dim() const { return static_cast<int>(theta_bounds.size()); }
};

// Families:
//  "const"           theta = (rate): nu identically equal to the rate
//  "sign_correcting" theta = (rate, band): boost jumps toward -sign(x) when the
//                    current action disagrees and |x| exceeds the band
//  "policy_greedy"   theta = (gain, rate): boost jumps toward the action grid
//                    point nearest to -gain * x when the current action disagrees
IntensityFamily make_family(const std::string& name, const ActionSpace& space, double nu_max);

struct OptimizeTraceRow {
  Vec theta;
  double gain = 0.0;
  double se = 0.0;
};

struct OptimizeReport {
  Vec theta;
  double gain = 0.0;
  double se = 0.0;
  bool budget_exhausted = false;
  double weight_cv_max = 0.0;
  std::string estimator;
  std::vector<OptimizeTraceRow> trace;
};

// Coordinate-refining grid search over theta: a coarse factorial sweep followed
// by local refinements around the incumbent. `evaluate` returns (objective, se)
// for a concrete field; it is called at most `budget` distinct thetas.
OptimizeReport optimize_family_generic(
    const IntensityFamily& family, int budget,
    const std::function<std::pair<double, double>(const IntensityField&)>& evaluate);

// Same search with the objective fixed to the randomized gain estimate under
// common random numbers. estimator: "reweighted" (default) or "direct".
OptimizeReport optimize_intensity(const ProblemSpec& spec, const IntensityFamily& family,
                                  const TimeGrid& grid, int n_paths, std::uint64_t seed, int budget,
                                  const std::string& estimator = "reweighted");

}  // namespace randcontrol
