#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace rfqmm::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double stddev(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

inline double std_error(std::span<const double> x) {
  return x.empty() ? 0.0 : stddev(x) / std::sqrt(static_cast<double>(x.size()));
}

/// One-sample t statistic against mu0. Zero spread gives +-inf (or 0 when equal).
inline double t_stat(std::span<const double> x, double mu0 = 0.0) {
  const double se = std_error(x);
  const double d = mean(x) - mu0;
  if (se == 0.0) return d == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), d);
  return d / se;
}

/// Linear-interpolation quantile (type 7) of an already sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct FiveNumber {
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

inline FiveNumber five_number(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  return {x.front(), quantile_sorted(x, 0.25), quantile_sorted(x, 0.5), quantile_sorted(x, 0.75), x.back()};
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

/// Least-squares slope of y against 0..n-1 and its t statistic.
struct Slope {
  double slope = 0.0;
  double t = 0.0;
};

inline Slope trend(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 3) return {};
  const double mx = 0.5 * static_cast<double>(n - 1);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (static_cast<double>(i) - mx) * (y[i] - my);
    sxx += (static_cast<double>(i) - mx) * (static_cast<double>(i) - mx);
  }
  const double b = sxy / sxx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - my - b * (static_cast<double>(i) - mx);
    sse += r * r;
  }
  const double se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  return {b, se > 0.0 ? b / se : 0.0};
}

}  // namespace rfqmm::stats
