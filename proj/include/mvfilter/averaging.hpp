#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mvfilter/dynamics.hpp"
#include "mvfilter/model.hpp"
#include "mvfilter/stats.hpp"
#include "mvfilter/stochastics.hpp"

namespace mvfilter {

/// Stream tag of an epsilon grid point: its bit pattern, so results at one
/// epsilon do not depend on which other points share the grid.
std::uint64_t epsilon_tag(double epsilon);

/// sup_k |Y^eps_k - Ybar_k|^2 for one replication. Y^eps is driven by
/// particle 0 of an M-particle ensemble whose cloud is the law argument;
/// Ybar uses the same W, so only the drift mismatch remains.
double sup_error_one_path(const ModelSpec& model, double epsilon, const TimeGrid& grid_obs,
                          std::size_t particles, std::span<const double> hbar,
                          const NoisePlan& plan, std::uint64_t replication,
                          double kappa = kDefaultKappa);

struct RateOptions {
  double T = 1.0;
  double dt_obs = -1.0;  // < 0: 1e-3 T
  double kappa = kDefaultKappa;
  std::size_t particles = 1000;
  std::size_t n_reps = 200;
  /// Standard error of hbar; enters the regression floor.
  double hbar_se = 0.0;
};

struct RateReport {
  std::vector<double> eps_grid;
  std::vector<double> mean_sq_sup_error;
  std::vector<double> std_error;
  std::size_t n_reps = 0;
  double fitted_slope = 0.0;
  double slope_stderr = 0.0;
  /// T^2 (se(hbar)^2 + (|h|_inf / M)^2): the error plateau left by hbar and
  /// the finite law ensemble. Points below 5x floor are not fitted.
  double floor = 0.0;
  std::vector<bool> used_in_fit;
};

/// Log-log least squares of error on epsilon.
LinearFit fit_rate(std::span<const double> eps, std::span<const double> errors);

/// Requires a strictly decreasing grid in (0, 1) with at least 4 points.
RateReport rate_experiment(const ModelSpec& model, std::span<const double> eps_grid,
                           std::span<const double> hbar, const NoisePlan& plan,
                           const RateOptions& options = {});

}  // namespace mvfilter
