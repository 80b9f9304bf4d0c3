#pragma once

#include <vector>

#include "randcontrol/types.hpp"

namespace randcontrol {

// Pairwise (cascade) summation over a fixed-order buffer. Deterministic for a
// given input order regardless of how the buffer was filled, which is what the
// reproducibility guarantee leans on.
double pairwise_sum(const std::vector<double>& values);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
  std::size_t n = 0;
};

MeanSe mean_se(const std::vector<double>& values);

// Pearson correlation of two equally long samples.
double correlation(const std::vector<double>& a, const std::vector<double>& b);

// One-sample Kolmogorov-Smirnov test of `samples` against Exp(rate).
// Returns the asymptotic p-value with the Stephens small-sample correction.
double ks_exponential_pvalue(std::vector<double> samples, double rate);

}  // namespace randcontrol
