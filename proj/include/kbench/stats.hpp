#pragma once

#include <span>
#include <vector>

#include "kbench/common.hpp"

namespace kbench {

double mean(std::span<const double> v);

/// Sample standard deviation (n-1 denominator). Requires n >= 2.
double sample_sd(std::span<const double> v);

struct Summary {
  double mean = 0;
  double sd = 0;
};

Summary summary_stats(std::span<const double> v);

/// Sample Pearson correlation. Requires equal lengths >= 3 and nonzero
/// variance in both arguments (zero variance -> NumericError).
double pearson_r(std::span<const double> x, std::span<const double> y);

struct OlsFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

/// Least-squares line y = slope*x + intercept. Requires length >= 2 and
/// nonconstant x. For constant y, r_squared is defined as 0.
OlsFit ols_fit(std::span<const double> x, std::span<const double> y);

/// Linear-interpolation quantile between order statistics, p in [0,1].
double quantile(std::vector<double> v, double p);
double median(std::vector<double> v);
double iqr(std::vector<double> v);

}  // namespace kbench
