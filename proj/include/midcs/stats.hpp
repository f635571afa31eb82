#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "midcs/error.hpp"

namespace midcs {

// Ordinary least squares y = slope * x + intercept. `residual` is the RMS of
// the fit residuals; [first, last] are the ladder indices the fit used.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  std::size_t first = 0;
  std::size_t last = 0;
};

inline LinearFit ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ParameterError("ols_fit: need at least two (x, y) pairs of equal length");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) throw NumericError("ols_fit: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double half_width() const { return 0.5 * (hi - lo); }
};

// Two-sided Wilson score interval; z = 1.959964 gives 95% coverage.
inline Interval wilson_interval(std::size_t successes, std::size_t trials,
                                double z = 1.959963984540054) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double spread = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - spread), std::min(1.0, centre + spread)};
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ParameterError("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// Mann-Kendall trend test with tie-corrected variance and continuity
// correction. p values come from the normal approximation.
struct TrendTest {
  double s = 0.0;
  double z = 0.0;
  double p_increasing = 1.0;  // one-sided p value against "no upward trend"
  double p_decreasing = 1.0;
};

inline TrendTest mann_kendall(std::span<const double> series) {
  TrendTest out;
  const std::size_t n = series.size();
  if (n < 3) return out;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = series[j] - series[i];
      s += (d > 0.0) - (d < 0.0);
    }
  }
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * (t - 1.0) * (2.0 * t + 5.0);
    i = j;
  }
  const double nn = static_cast<double>(n);
  const double var = (nn * (nn - 1.0) * (2.0 * nn + 5.0) - tie_term) / 18.0;
  out.s = s;
  if (var <= 0.0) return out;
  if (s > 0.0) out.z = (s - 1.0) / std::sqrt(var);
  if (s < 0.0) out.z = (s + 1.0) / std::sqrt(var);
  out.p_increasing = 1.0 - normal_cdf(out.z);
  out.p_decreasing = normal_cdf(out.z);
  return out;
}

// Entropy in bits of an empirical law given by cell counts.
inline double entropy_from_counts(std::span<const std::size_t> counts) {
  double total = 0.0;
  for (std::size_t c : counts) total += static_cast<double>(c);
  if (total <= 0.0) throw ParameterError("entropy: no observations");
  double acc = 0.0;
  for (std::size_t c : counts) {
    if (c > 0) acc += static_cast<double>(c) * std::log2(static_cast<double>(c));
  }
  return std::max(0.0, std::log2(total) - acc / total);
}

// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ParameterError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace midcs
