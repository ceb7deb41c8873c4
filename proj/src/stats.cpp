#include "kbench/stats.hpp"

#include <algorithm>
#include <cmath>

namespace kbench {

double mean(std::span<const double> v) {
  if (v.empty()) throw ConfigError("mean: empty input");
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) throw ConfigError("sample_sd: need at least 2 values");
  const double m = mean(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Summary summary_stats(std::span<const double> v) {
  if (v.size() < 2) throw ConfigError("summary_stats: need at least 2 values");
  return {mean(v), sample_sd(v)};
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("pearson_r: length mismatch");
  if (x.size() < 3) throw ConfigError("pearson_r: need at least 3 points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw NumericError("pearson_r: zero variance, correlation undefined");
  return sxy / std::sqrt(sxx * syy);
}

OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("ols_fit: length mismatch");
  if (x.size() < 2) throw ConfigError("ols_fit: need at least 2 points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw NumericError("ols_fit: constant x, slope undefined");
  OlsFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.slope * x[i] + fit.intercept);
    ss_res += e * e;
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  fit.r_squared = ss_tot == 0.0 ? 0.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw ConfigError("quantile: empty input");
  if (p < 0.0 || p > 1.0) throw ConfigError("quantile: p outside [0,1]");
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double iqr(std::vector<double> v) {
  const double q1 = quantile(v, 0.25);
  const double q3 = quantile(std::move(v), 0.75);
  return q3 - q1;
}

}  // namespace kbench
