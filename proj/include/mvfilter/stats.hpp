#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mvfilter {

/// Point estimate with its Monte-Carlo standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Welford accumulator.
class RunningStats {
 public:
  void add(double x);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance (0 for fewer than two samples).
  double variance() const;
  double std_error() const;
  Estimate estimate() const { return {mean(), std_error()}; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

Estimate mean_estimate(std::span<const double> xs);

/// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::size_t n = 0;
};
LinearFit fit_line(std::span<const double> xs, std::span<const double> ys);

/// Slope of log(y) on log(x): the empirical power-law exponent.
LinearFit fit_loglog(std::span<const double> xs, std::span<const double> ys);

}  // namespace mvfilter
