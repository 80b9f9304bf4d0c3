#pragma once

#include <cstdint>
#include <vector>

#include "randcontrol/errors.hpp"
#include "randcontrol/types.hpp"

namespace randcontrol {

// Counter-based random stream. Draw i of stream s under master seed m is a pure
// function of (m, s, i), so ensembles can be generated in any order or in parallel
// and still reproduce bit for bit. The output sequence is the splitmix64 orbit
// z_i = finalize(base + i*gamma) with base derived from (m, s) by double mixing.
class RngStream {
 public:
  RngStream() : base_(0), counter_(0), have_cached_normal_(false), cached_normal_(0.0) {}
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1); never returns 0 or 1, so logs are safe.
  double next_uniform();

  // Standard normal via Box-Muller. The transform is pinned: changing it would
  // silently change every regression-tested expectation in the suite.
  double next_normal();

  // Exponential with the given rate > 0.
  double next_exponential(double rate);

 private:
  std::uint64_t base_;
  std::uint64_t counter_;
  bool have_cached_normal_;
  double cached_normal_;
};

// Child stream keyed on (master_seed, stream_index); distinct indices give
// statistically independent streams.
RngStream split_stream(std::uint64_t master_seed, std::uint64_t stream_index);

// Uniform grid 0 = t_0 < t_1 < ... < t_N = horizon.
class TimeGrid {
 public:
  TimeGrid() : horizon_(0.0), n_steps_(0) {}
  TimeGrid(double horizon, int n_steps);

  double horizon() const { return horizon_; }
  int n_steps() const { return n_steps_; }
  double dt() const { return horizon_ / n_steps_; }
  double point(int i) const { return horizon_ * static_cast<double>(i) / n_steps_; }

  // Largest i with point(i) <= t, clamped to [0, n_steps].
  int cell_left(double t) const;

 private:
  double horizon_;
  int n_steps_;
};

// Brownian increments over a grid: row i holds W_{t_{i+1}} - W_{t_i}.
struct BrownianPath {
  TimeGrid grid;
  Mat increments;  // n_steps x dim

  int dim() const { return static_cast<int>(increments.cols()); }
};

BrownianPath sample_brownian(const TimeGrid& grid, int dim, RngStream& stream);

}  // namespace randcontrol
