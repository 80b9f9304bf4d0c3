#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "randcontrol/sde.hpp"

namespace randcontrol {

// Simple admissible control: a deterministic subdivision of [0, T] and, per
// interval, a map from a state bin (coordinate 0) to an action. The action is
// frozen at each subdivision start, matching piecewise-constant admissibility.
struct SimpleControl {
  std::vector<double> times;             // 0 = tau_0 < ... < tau_M = T
  std::vector<double> bin_edges;         // sorted; bins = edges.size() + 1
  std::vector<std::vector<int>> policy;  // [interval][bin] -> action index

  int n_intervals() const { return static_cast<int>(times.size()) - 1; }
  int n_bins() const { return static_cast<int>(bin_edges.size()) + 1; }
  int bin_of(double x) const;
  void validate(const ProblemSpec& spec) const;

  // Stateful per-path evaluator implementing the freeze-at-interval-start rule.
  FeedbackControl make_policy() const;
};

// Monte Carlo gain of a simple control.
MeanSe gain(const ProblemSpec& spec, const SimpleControl& ctrl, const TimeGrid& grid, int n_paths,
            std::uint64_t seed);

// Empirical Krylov distance between two simple controls, both evaluated along
// common paths driven by the first control.
MeanSe control_distance(const ProblemSpec& spec, const SimpleControl& a, const SimpleControl& b,
                        const TimeGrid& grid, int n_paths, std::uint64_t seed);

struct BruteForceOptions {
  std::vector<double> times;       // subdivision
  std::vector<double> bin_edges;   // state bins for enumeration / policy extraction
  std::vector<int> action_grid;    // candidate actions (indices); empty = all
  std::string mode = "backward";   // "enumerate" | "backward"
  int n_paths = 1000;              // per-policy paths (enumerate)
  int n_inner = 100;               // inner samples per (bin, action) (backward)
  std::vector<double> centers;     // bin centers for backward mode
  long enumeration_cap = 200000;
  std::uint64_t seed = 0;
};

struct BruteForceReport {
  double value = 0.0;
  double se = 0.0;
  SimpleControl argmax;
  long policies_searched = 0;
};

// Exhaustive or dynamic-programming estimate of the classical value over the
// simple-control family.
BruteForceReport value_brute_force(const ProblemSpec& spec, const TimeGrid& grid,
                                   const BruteForceOptions& opt);

}  // namespace randcontrol
