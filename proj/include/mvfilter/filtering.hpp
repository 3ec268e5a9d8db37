#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mvfilter/dynamics.hpp"
#include "mvfilter/ergodics.hpp"
#include "mvfilter/model.hpp"
#include "mvfilter/stats.hpp"
#include "mvfilter/stochastics.hpp"

namespace mvfilter {

/// log Lambda on the grid of `y` by the left-point rule
///   logL[k+1] = logL[k] + h[k] . (Y[k+1] - Y[k]) - |h[k]|^2 dt / 2,
/// where hpath holds n_steps rows of m values. Returns n_steps + 1 values.
std::vector<double> ks_log_weight(std::span<const double> hpath, const SlowPath& y);

/// log((1/N) sum_i exp(a_i)) without overflow.
double log_mean_exp(std::span<const double> a);

struct FilterConfig {
  double kappa = kDefaultKappa;
  /// Systematic resampling when ESS < resample_threshold * N. Off by default.
  bool resample = false;
  double resample_threshold = 0.5;
  bool keep_log_weights = false;
  /// Grid indices at which the estimates are evaluated; empty means all.
  std::vector<std::size_t> eval_indices;
  std::uint64_t replication = 0;
  std::uint64_t tag = 0;
};

struct FilterOutput {
  TimeGrid grid_obs;
  std::size_t particles = 0;
  /// log_weights[k * particles + i]; filled only with keep_log_weights.
  std::vector<double> log_weights;
  std::vector<std::size_t> eval_indices;
  /// estimates[f][e]: pi-hat of test function f at eval_indices[e].
  std::vector<std::vector<double>> estimates;
  std::vector<double> ess_path;
  /// P-tilde_t(1) = mean_i Lambda^i_t, and its logarithm.
  std::vector<double> normalizer_path;
  std::vector<double> log_normalizer_path;
  std::size_t resample_count = 0;
};

/// Kallianpur-Striebel particle filter. N signal particles evolve under the
/// physical measure, independently of Y (streams {filter, replication, i,
/// tag}); the law argument of h and F is read from `law`, which must be on
/// Y's grid.
FilterOutput particle_filter(const ModelSpec& model, double epsilon, const SlowPath& y,
                             std::size_t particles, const Ensemble& law,
                             std::span<const TestFunction> Fs, const NoisePlan& plan,
                             const FilterConfig& config = {});

/// Same, with an independent law ensemble of `law_particles` paths
/// (streams {law, replication, i, tag}).
FilterOutput particle_filter(const ModelSpec& model, double epsilon, const SlowPath& y,
                             std::size_t particles, std::size_t law_particles,
                             std::span<const TestFunction> Fs, const NoisePlan& plan,
                             const FilterConfig& config = {});

/// Lambda-bar, P-bar(Fbar) = Fbar Lambda-bar and pi-bar(Fbar) = P-bar / Lambda-bar.
struct AveragedFilter {
  std::vector<double> times;
  std::vector<double> log_lambda;
  std::vector<double> lambda;
  std::vector<double> p_bar;
  std::vector<double> pi_bar;
};
AveragedFilter averaged_filter(std::span<const double> hbar, double Fbar, const SlowPath& ybar);

struct FilterExperimentOptions {
  double t_eval = 1.0;
  double dt_obs = 1e-3;
  double kappa = kDefaultKappa;
  std::size_t particles = 2000;
  std::size_t law_particles = 1000;
  std::size_t n_reps = 200;
  /// Also run the h = 0 control at the largest epsilon.
  bool control = true;
};

struct FilterReport {
  std::vector<double> eps_grid;
  std::vector<double> mean_sq_gap;
  std::vector<double> std_error;
  std::size_t n_reps = 0;
  double Fbar = 0.0;
  double fitted_slope = 0.0;
  bool has_control = false;
  double control_eps = 0.0;
  double control_gap = 0.0;
  double control_std_error = 0.0;
};

/// E|pi-hat^eps_t(F) - Fbar|^2 per epsilon. Each replication builds one
/// ensemble of law_particles paths; its particle 0 drives Y and its cloud is
/// the law argument for both Y and the filter. The control replaces h by 0,
/// which leaves the N-particle and law-ensemble noise floor.
FilterReport filter_convergence_experiment(const ModelSpec& model,
                                           std::span<const double> eps_grid,
                                           const TestFunction& F, double Fbar,
                                           const NoisePlan& plan,
                                           const FilterExperimentOptions& options = {});

struct DiagnosticOptions {
  double T = 1.0;
  double dt_obs = 1e-3;
  double kappa = kDefaultKappa;
  std::size_t particles = 100000;
  std::size_t law_particles = 1000;
  std::size_t n_reps = 200;
  std::uint64_t tag = 0;
};

/// Mean of Lambda^i_T over particles, each weighted against its own
/// independent Brownian Y (the reference-measure scenario); expect 1.
Estimate martingale_diagnostic(const ModelSpec& model, double epsilon, const NoisePlan& plan,
                               const DiagnosticOptions& options = {});

/// Monte-Carlo E[P-hat^eps_T(1)^{-r}] over replications of (ensemble, Y,
/// filter), with Y from the physical measure.
Estimate inverse_moment_diagnostic(const ModelSpec& model, double epsilon, double r,
                                   const NoisePlan& plan, const DiagnosticOptions& options = {});

}  // namespace mvfilter
