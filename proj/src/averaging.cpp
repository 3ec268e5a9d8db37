#include "mvfilter/averaging.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mvfilter/parallel.hpp"

namespace mvfilter {

std::uint64_t epsilon_tag(double epsilon) { return std::bit_cast<std::uint64_t>(epsilon); }

double sup_error_one_path(const ModelSpec& model, double epsilon, const TimeGrid& grid_obs,
                          std::size_t particles, std::span<const double> hbar,
                          const NoisePlan& plan, std::uint64_t replication, double kappa) {
  if (hbar.size() != model.dim_obs) {
    throw std::invalid_argument("sup_error_one_path: hbar has wrong dimension");
  }
  const std::uint64_t tag = epsilon_tag(epsilon);
  const Ensemble ens =
      simulate_fast_ensemble(model, epsilon, grid_obs, particles, kappa, plan, replication, tag);
  const BrownianPath w =
      sample_brownian(grid_obs, model.dim_obs, plan, {Role::observation, replication, 0, tag});
  const SlowPath y = simulate_observation(model, ens, w, 0);
  const SlowPath ybar = simulate_averaged(hbar, w);

  double worst = 0.0;
  for (std::size_t k = 0; k < grid_obs.size(); ++k) {
    double d = 0.0;
    for (std::size_t j = 0; j < y.dim; ++j) {
      const double diff = y.values[k * y.dim + j] - ybar.values[k * y.dim + j];
      d += diff * diff;
    }
    worst = std::max(worst, d);
  }
  return worst;
}

LinearFit fit_rate(std::span<const double> eps, std::span<const double> errors) {
  if (eps.size() != errors.size() || eps.size() < 2) {
    throw std::invalid_argument("fit_rate: need at least two (epsilon, error) pairs");
  }
  return fit_loglog(eps, errors);
}

RateReport rate_experiment(const ModelSpec& model, std::span<const double> eps_grid,
                           std::span<const double> hbar, const NoisePlan& plan,
                           const RateOptions& options) {
  if (eps_grid.size() < 4) {
    throw std::invalid_argument("rate_experiment: need at least 4 epsilon values, got " +
                                std::to_string(eps_grid.size()));
  }
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0 && eps_grid[i] < 1.0)) {
      throw std::invalid_argument("rate_experiment: epsilon values must lie in (0, 1)");
    }
    if (i > 0 && !(eps_grid[i] < eps_grid[i - 1])) {
      throw std::invalid_argument("rate_experiment: epsilon grid must be strictly decreasing");
    }
  }
  if (options.n_reps < 2) throw std::invalid_argument("rate_experiment: n_reps must be >= 2");
  const double dt_obs = options.dt_obs > 0.0 ? options.dt_obs : 1e-3 * options.T;
  const TimeGrid grid = make_grid(options.T, dt_obs);
  const std::size_t n_eps = eps_grid.size(), R = options.n_reps;

  std::vector<double> errors(n_eps * R);
  parallel_for(n_eps * R, [&](std::size_t task) {
    const std::size_t e = task / R, r = task % R;
    errors[task] = sup_error_one_path(model, eps_grid[e], grid, options.particles, hbar, plan,
                                      r, options.kappa);
  });

  RateReport rep;
  rep.eps_grid.assign(eps_grid.begin(), eps_grid.end());
  rep.n_reps = R;
  for (std::size_t e = 0; e < n_eps; ++e) {
    const Estimate est = mean_estimate(std::span<const double>(errors).subspan(e * R, R));
    rep.mean_sq_sup_error.push_back(est.value);
    rep.std_error.push_back(est.std_error);
  }
  const double mean_field = model.obs_bound / static_cast<double>(options.particles);
  rep.floor = options.T * options.T * (options.hbar_se * options.hbar_se + mean_field * mean_field);

  std::vector<double> xs, ys;
  for (std::size_t e = 0; e < n_eps; ++e) {
    const bool use = rep.mean_sq_sup_error[e] > 5.0 * rep.floor;
    rep.used_in_fit.push_back(use);
    if (use) {
      xs.push_back(eps_grid[e]);
      ys.push_back(rep.mean_sq_sup_error[e]);
    }
  }
  if (xs.size() >= 2) {
    const LinearFit fit = fit_rate(xs, ys);
    rep.fitted_slope = fit.slope;
    rep.slope_stderr = fit.slope_stderr;
  } else {
    rep.fitted_slope = std::numeric_limits<double>::quiet_NaN();
    rep.slope_stderr = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

}  // namespace mvfilter
