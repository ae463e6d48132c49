#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace cjm {

/// Empirical quantile with linear interpolation between order statistics
/// (the convention fixed for every summary in this project).
inline double quantile_linear_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile_linear(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_linear_sorted(values, p);
}

inline double mean_of(const Eigen::VectorXd& v) {
  return v.size() ? v.mean() : std::numeric_limits<double>::quiet_NaN();
}

/// Unbiased sample variance.
inline double sample_variance(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(n - 1);
}

/// Effective sample size by the initial positive sequence of autocorrelations.
inline double effective_sample_size(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n < 10) return static_cast<double>(n);
  const double m = v.mean();
  const Eigen::ArrayXd c = v.array() - m;
  const double var0 = (c * c).sum() / static_cast<double>(n);
  if (var0 <= 0.0) return static_cast<double>(n);
  double acf_sum = 0.0;
  for (Eigen::Index lag = 1; lag < n - 1; ++lag) {
    const double rho =
        (c.head(n - lag) * c.tail(n - lag)).sum() / (static_cast<double>(n) * var0);
    if (rho <= 0.0) break;
    acf_sum += rho;
  }
  return static_cast<double>(n) / (1.0 + 2.0 * acf_sum);
}

}  // namespace cjm
