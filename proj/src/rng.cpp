#include "randcontrol/rng.hpp"

#include <cmath>

namespace randcontrol {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : counter_(0), have_cached_normal_(false), cached_normal_(0.0) {
  // Two mixing rounds decorrelate the (seed, stream) lattice before the orbit starts.
  base_ = mix64(mix64(master_seed) + kGamma * (stream_index + 1));
}

std::uint64_t RngStream::next_u64() {
  std::uint64_t z = base_ + kGamma * counter_;
  ++counter_;
  return mix64(z);
}

double RngStream::next_uniform() {
  // 53-bit mantissa, offset by half an ulp so the result lies strictly in (0,1).
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::next_normal() {
  if (have_cached_normal_) {
    have_cached_normal_ = false;
    return cached_normal_;
  }
  double u1 = next_uniform();
  double u2 = next_uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(theta);
  have_cached_normal_ = true;
  return r * std::cos(theta);
}

double RngStream::next_exponential(double rate) {
  if (!(rate > 0.0)) throw ConfigError("exponential rate must be positive");
  return -std::log(next_uniform()) / rate;
}

RngStream split_stream(std::uint64_t master_seed, std::uint64_t stream_index) {
  return RngStream(master_seed, stream_index);
}

TimeGrid::TimeGrid(double horizon, int n_steps) : horizon_(horizon), n_steps_(n_steps) {
  if (!(horizon > 0.0)) throw ConfigError("time grid horizon must be positive");
  if (n_steps < 1) throw ConfigError("time grid needs at least one step");
}

int TimeGrid::cell_left(double t) const {
  if (t <= 0.0) return 0;
  if (t >= horizon_) return n_steps_;
  int i = static_cast<int>(t / dt());
  while (i > 0 && point(i) > t) --i;
  while (i < n_steps_ && point(i + 1) <= t) ++i;
  return i;
}

BrownianPath sample_brownian(const TimeGrid& grid, int dim, RngStream& stream) {
  if (grid.n_steps() < 1) throw ConfigError("cannot sample a Brownian path on an empty grid");
  if (dim < 1) throw ConfigError("Brownian dimension must be at least 1");
  BrownianPath path;
  path.grid = grid;
  path.increments.resize(grid.n_steps(), dim);
  double sd = std::sqrt(grid.dt());
  for (int i = 0; i < grid.n_steps(); ++i)
    for (int d = 0; d < dim; ++d) path.increments(i, d) = sd * stream.next_normal();
  return path;
}

}  // namespace randcontrol
