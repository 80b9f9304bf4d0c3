#include "randcontrol/action_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace randcontrol {

ActionSpace ActionSpace::finite(std::vector<double> values, std::vector<double> weights, int a0_index) {
  if (values.empty()) throw ConfigError("action space needs at least one mark");
  if (values.size() != weights.size()) throw ConfigError("mark and weight counts differ");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("mark weights must be positive and finite");
  for (double v : values)
    if (!std::isfinite(v)) throw ConfigError("mark values must be finite");
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = i + 1; j < values.size(); ++j)
      if (values[i] == values[j]) throw ConfigError("mark values must be distinct");
  if (a0_index < 0 || a0_index >= static_cast<int>(values.size()))
    throw ConfigError("anchor index outside the mark set");
  ActionSpace s;
  s.kind = Kind::finite;
  s.values = std::move(values);
  s.weights = std::move(weights);
  s.a0_index = a0_index;
  return s;
}

ActionSpace ActionSpace::interval(double lo, double hi, double density) {
  if (!(hi > lo)) throw ConfigError("interval space needs hi > lo");
  if (!(density > 0.0)) throw ConfigError("interval density must be positive");
  ActionSpace s;
  s.kind = Kind::interval;
  s.lo = lo;
  s.hi = hi;
  s.density = density;
  return s;
}

ActionSpace ActionSpace::discretized(int n_bins, int a0_index) const {
  if (kind != Kind::interval) throw ConfigError("discretized() applies to interval spaces");
  if (n_bins < 1) throw ConfigError("discretization needs at least one bin");
  std::vector<double> v(n_bins), w(n_bins);
  double width = (hi - lo) / n_bins;
  for (int j = 0; j < n_bins; ++j) {
    v[j] = lo + (j + 0.5) * width;
    w[j] = density * width;
  }
  return finite(std::move(v), std::move(w), a0_index);
}

double ActionSpace::total_mass() const {
  if (kind == Kind::interval) return density * (hi - lo);
  double m = 0.0;
  for (double w : weights) m += w;
  return m;
}

void ActionSpace::require_finite(const std::string& op) const {
  if (kind != Kind::finite)
    throw ConfigError(op + ": interval spaces must be discretized before simulation");
}

double LiftedMeasure::cdf(double r) const {
  double acc = 0.0;
  for (const auto& seg : segments) {
    if (r >= seg.right) {
      acc += seg.mass;
    } else if (r > seg.left) {
      acc += seg.mass * (r - seg.left) / (seg.right - seg.left);
      break;
    } else {
      break;
    }
  }
  return acc / total_mass_;
}

double LiftedMeasure::quantile(double u) const {
  if (!(u > 0.0) || !(u < 1.0)) throw ConfigError("quantile argument must lie in (0,1)");
  double target = u * total_mass_;
  double acc = 0.0;
  for (const auto& seg : segments) {
    if (acc + seg.mass >= target) {
      double frac = (target - acc) / seg.mass;
      return seg.left + frac * (seg.right - seg.left);
    }
    acc += seg.mass;
  }
  return segments.back().right;
}

int LiftedMeasure::project_index(double r) const {
  if (space.kind == ActionSpace::Kind::interval) return r > 0.0 ? -2 : -1;
  int n = space.n_actions();
  if (r > 0.0) return n - 1;
  // r in (-(k+1), -k] belongs to the atom laid k slots from the right;
  // everything left of the laid-out block belongs to the leftmost atom.
  int k = static_cast<int>(std::floor(-r));
  int j = n - 1 - k;
  return std::max(0, std::min(n - 1, j));
}

double LiftedMeasure::project_value(double r) const {
  if (space.kind == ActionSpace::Kind::interval) {
    double v = space.lo + r;
    return std::min(std::max(v, space.lo), space.hi);
  }
  return space.values.at(project_index(r));
}

LiftedMeasure lift_measure(const ActionSpace& space) {
  LiftedMeasure out;
  out.space = space;
  if (space.kind == ActionSpace::Kind::interval) {
    LiftedSegment seg;
    seg.left = 0.0;
    seg.right = space.hi - space.lo;
    seg.mass = space.total_mass();
    seg.action_index = -2;
    out.segments.push_back(seg);
  } else {
    int n = space.n_actions();
    for (int j = 0; j < n; ++j) {
      LiftedSegment seg;
      seg.left = -static_cast<double>(n - j);
      seg.right = seg.left + 1.0;
      seg.mass = space.weights[j];
      seg.action_index = j;
      out.segments.push_back(seg);
    }
  }
  out.total_mass_ = 0.0;
  for (const auto& seg : out.segments) out.total_mass_ += seg.mass;
  if (!(out.total_mass_ > 0.0)) throw ConfigError("lifted measure has no mass");
  return out;
}

}  // namespace randcontrol
