#include "randcontrol/stats.hpp"

#include <algorithm>
#include <cmath>

#include "randcontrol/errors.hpp"

namespace randcontrol {

namespace {

double pairwise_range(const double* data, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_range(data, half) + pairwise_range(data + half, n - half);
}

}  // namespace

double pairwise_sum(const std::vector<double>& values) {
  return pairwise_range(values.data(), values.size());
}

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe out;
  out.n = values.size();
  if (out.n == 0) throw ConfigError("mean_se needs at least one sample");
  out.mean = pairwise_sum(values) / static_cast<double>(out.n);
  if (out.n == 1) return out;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    double d = values[i] - out.mean;
    sq[i] = d * d;
  }
  double var = pairwise_sum(sq) / static_cast<double>(out.n - 1);
  out.se = std::sqrt(var / static_cast<double>(out.n));
  return out;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ConfigError("correlation needs equal samples, n >= 2");
  MeanSe ma = mean_se(a);
  MeanSe mb = mean_se(b);
  std::vector<double> cross(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) cross[i] = (a[i] - ma.mean) * (b[i] - mb.mean);
  double cov = pairwise_sum(cross) / static_cast<double>(a.size() - 1);
  double sa = ma.se * std::sqrt(static_cast<double>(a.size()));
  double sb = mb.se * std::sqrt(static_cast<double>(b.size()));
  if (sa == 0.0 || sb == 0.0) return 0.0;
  return cov / (sa * sb);
}

double ks_exponential_pvalue(std::vector<double> samples, double rate) {
  if (samples.empty()) throw ConfigError("KS test needs samples");
  if (!(rate > 0.0)) throw ConfigError("KS test needs a positive rate");
  std::sort(samples.begin(), samples.end());
  double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double cdf = 1.0 - std::exp(-rate * samples[i]);
    double lo = static_cast<double>(i) / n;
    double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(std::abs(cdf - lo), std::abs(hi - cdf)));
  }
  double t = d * (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n));
  // Kolmogorov tail series; converges fast for t above ~0.3.
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * t * t);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::min(1.0, std::max(0.0, p));
}

}  // namespace randcontrol
