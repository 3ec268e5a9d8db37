#include "mvfilter/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mvfilter/averaging.hpp"
#include "mvfilter/parallel.hpp"

namespace mvfilter {

std::vector<double> ks_log_weight(std::span<const double> hpath, const SlowPath& y) {
  const std::size_t m = y.dim, steps = y.grid.n_steps;
  if (hpath.size() != steps * m) {
    throw std::invalid_argument("ks_log_weight: h path has " + std::to_string(hpath.size()) +
                                " values, expected " + std::to_string(steps * m));
  }
  std::vector<double> out(steps + 1, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    double inc = 0.0, sq = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double h = hpath[k * m + j];
      inc += h * y.increment(k, j);
      sq += h * h;
    }
    out[k + 1] = out[k] + inc - 0.5 * sq * y.grid.dt;
  }
  return out;
}

double log_mean_exp(std::span<const double> a) {
  if (a.empty()) throw std::invalid_argument("log_mean_exp: empty input");
  const double top = *std::max_element(a.begin(), a.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double x : a) s += std::exp(x - top);
  return top + std::log(s / static_cast<double>(a.size()));
}

namespace {

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t k = 0; k < n; ++k) idx[k] = k;
  return idx;
}

// Normalized weights relative to the largest log-weight.
struct Weights {
  std::vector<double> w;
  double total = 0.0;
  double ess = 0.0;
  double top = 0.0;  // largest log-weight
};

Weights normalize(std::span<const double> logw, double time) {
  const auto [lo, hi] = std::minmax_element(logw.begin(), logw.end());
  if (!std::isfinite(*hi)) {
    std::ostringstream msg;
    msg << "degenerate normalizer at t=" << time << ": max log-weight " << *hi
        << ", min log-weight " << *lo;
    throw NumericalError(msg.str());
  }
  Weights out;
  out.top = *hi;
  out.w.resize(logw.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    out.w[i] = std::exp(logw[i] - *hi);
    out.total += out.w[i];
    sq += out.w[i] * out.w[i];
  }
  out.ess = out.total * out.total / sq;
  return out;
}

// sum_i w_i F_i / sum_i w_i, shifted by F_0 so a constant F is returned
// exactly.
double weighted_mean(const Weights& wt, std::span<const double> f) {
  const double ref = f[0];
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += wt.w[i] * (f[i] - ref);
  return ref + acc / wt.total;
}

void systematic_resample(ParticleCloud& cloud, const Weights& wt, Rng& rng) {
  const std::size_t n = cloud.count(), dim = cloud.dim();
  const double step = wt.total / static_cast<double>(n);
  double u = rng.uniform() * step;
  const auto states = cloud.states();
  std::vector<double> next(states.size());
  double cum = wt.w[0];
  std::size_t src = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (u > cum && src + 1 < n) cum += wt.w[++src];
    std::copy_n(states.begin() + static_cast<std::ptrdiff_t>(src * dim), dim,
                next.begin() + static_cast<std::ptrdiff_t>(i * dim));
    u += step;
  }
  std::copy(next.begin(), next.end(), cloud.states().begin());
}

template <class LawAt>
FilterOutput run_filter(const ModelSpec& model, double epsilon, const SlowPath& y,
                        std::size_t particles, LawAt&& law_at,
                        std::span<const TestFunction> Fs, const NoisePlan& plan,
                        const FilterConfig& config) {
  if (y.dim != model.dim_obs) {
    throw std::invalid_argument("particle_filter: Y has dimension " + std::to_string(y.dim) +
                                ", h has " + std::to_string(model.dim_obs));
  }
  if (particles < 1) throw std::invalid_argument("particle_filter: need at least one particle");
  const TimeGrid& grid = y.grid;
  const std::size_t m = model.dim_obs, N = particles;

  FilterOutput out;
  out.grid_obs = grid;
  out.particles = N;
  out.eval_indices = config.eval_indices.empty() ? all_indices(grid.size()) : config.eval_indices;
  for (std::size_t k : out.eval_indices) {
    if (k >= grid.size()) throw std::invalid_argument("particle_filter: eval index out of range");
  }
  out.estimates.assign(Fs.size(), {});
  if (config.keep_log_weights) out.log_weights.reserve(grid.size() * N);

  ParticleCloud cloud = make_fast_cloud(model, epsilon, N, grid, config.kappa, plan,
                                        {Role::filter, config.replication, 0, config.tag});
  Rng resample_rng = plan.stream({Role::resample, config.replication, 0, config.tag});
  std::vector<double> logw(N, 0.0), hvals(N * m), fvals(N);
  double log_offset = 0.0;  // log of the mean weight dropped at each resampling
  std::size_t next_eval = 0;
  std::vector<std::size_t> eval_sorted = out.eval_indices;
  std::sort(eval_sorted.begin(), eval_sorted.end());

  for (std::size_t k = 0; k < grid.size(); ++k) {
    const EmpiricalMeasure mu = law_at(k);
    const Weights wt = normalize(logw, grid.time(k));
    out.ess_path.push_back(wt.ess);
    const double lmean =
        wt.top + std::log(wt.total / static_cast<double>(N)) + log_offset;
    out.log_normalizer_path.push_back(lmean);
    out.normalizer_path.push_back(std::exp(lmean));
    if (config.keep_log_weights) {
      for (double lw : logw) out.log_weights.push_back(lw + log_offset);
    }
    while (next_eval < eval_sorted.size() && eval_sorted[next_eval] == k) {
      for (std::size_t f = 0; f < Fs.size(); ++f) {
        Fs[f].bind(mu)(cloud.states(), fvals);
        out.estimates[f].push_back(weighted_mean(wt, fvals));
      }
      ++next_eval;
    }
    if (k == grid.n_steps) break;

    model.bind_obs(mu)(cloud.states(), hvals);
    for (std::size_t i = 0; i < N; ++i) {
      double inc = 0.0, sq = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double h = hvals[i * m + j];
        inc += h * y.increment(k, j);
        sq += h * h;
      }
      logw[i] += inc - 0.5 * sq * grid.dt;
    }
    if (config.resample) {
      const Weights after = normalize(logw, grid.time(k + 1));
      if (after.ess < config.resample_threshold * static_cast<double>(N)) {
        log_offset += log_mean_exp(logw);
        systematic_resample(cloud, after, resample_rng);
        std::fill(logw.begin(), logw.end(), 0.0);
        ++out.resample_count;
      }
    }
    cloud.advance();
  }

  // Estimates were produced in sorted order; map back to the requested order.
  if (eval_sorted != out.eval_indices) {
    for (auto& series : out.estimates) {
      std::vector<double> reordered(out.eval_indices.size());
      for (std::size_t e = 0; e < out.eval_indices.size(); ++e) {
        const auto pos = std::lower_bound(eval_sorted.begin(), eval_sorted.end(),
                                          out.eval_indices[e]) - eval_sorted.begin();
        reordered[e] = series[static_cast<std::size_t>(pos)];
      }
      series = std::move(reordered);
    }
  }
  return out;
}

}  // namespace

FilterOutput particle_filter(const ModelSpec& model, double epsilon, const SlowPath& y,
                             std::size_t particles, const Ensemble& law,
                             std::span<const TestFunction> Fs, const NoisePlan& plan,
                             const FilterConfig& config) {
  if (law.grid_obs.n_steps != y.grid.n_steps) {
    throw std::invalid_argument("particle_filter: law ensemble and Y grids differ");
  }
  return run_filter(model, epsilon, y, particles, [&](std::size_t k) { return law.law(k); }, Fs,
                    plan, config);
}

FilterOutput particle_filter(const ModelSpec& model, double epsilon, const SlowPath& y,
                             std::size_t particles, std::size_t law_particles,
                             std::span<const TestFunction> Fs, const NoisePlan& plan,
                             const FilterConfig& config) {
  if (law_particles < 2) throw std::invalid_argument("particle_filter: law_particles must be >= 2");
  ParticleCloud law_cloud = make_fast_cloud(model, epsilon, law_particles, y.grid, config.kappa,
                                            plan, {Role::law, config.replication, 0, config.tag});
  std::size_t at = 0;
  return run_filter(
      model, epsilon, y, particles,
      [&](std::size_t k) {
        while (at < k) {
          law_cloud.advance();
          ++at;
        }
        return law_cloud.law();
      },
      Fs, plan, config);
}

AveragedFilter averaged_filter(std::span<const double> hbar, double Fbar, const SlowPath& ybar) {
  if (hbar.size() != ybar.dim) throw std::invalid_argument("averaged_filter: hbar dimension");
  double hsq = 0.0;
  for (double h : hbar) hsq += h * h;
  AveragedFilter out;
  for (std::size_t k = 0; k < ybar.grid.size(); ++k) {
    const double t = ybar.grid.time(k);
    double lin = 0.0;
    for (std::size_t j = 0; j < ybar.dim; ++j) lin += hbar[j] * ybar.values[k * ybar.dim + j];
    const double log_lambda = lin - 0.5 * hsq * t;
    const double lambda = std::exp(log_lambda);
    const double p = Fbar * lambda;
    out.times.push_back(t);
    out.log_lambda.push_back(log_lambda);
    out.lambda.push_back(lambda);
    out.p_bar.push_back(p);
    // Lambda-bar is F^Ybar-measurable, so the ratio is Fbar; it is only
    // undefined when Lambda-bar leaves the representable range.
    out.pi_bar.push_back(lambda > 0.0 && std::isfinite(p) ? p / lambda : Fbar);
  }
  return out;
}

namespace {

double filter_gap(const ModelSpec& model, double epsilon, const TimeGrid& grid,
                  const TestFunction& F, double Fbar, const NoisePlan& plan,
                  const FilterExperimentOptions& options, std::uint64_t rep, std::uint64_t tag,
                  const ModelSpec& data_model) {
  const Ensemble ens = simulate_fast_ensemble(data_model, epsilon, grid, options.law_particles,
                                              options.kappa, plan, rep, tag);
  const BrownianPath w =
      sample_brownian(grid, data_model.dim_obs, plan, {Role::observation, rep, 0, tag});
  const SlowPath y = simulate_observation(data_model, ens, w, 0);
  FilterConfig cfg;
  cfg.kappa = options.kappa;
  cfg.eval_indices = {grid.n_steps};
  cfg.replication = rep;
  cfg.tag = tag;
  const TestFunction fs[] = {F};
  const FilterOutput out = particle_filter(model, epsilon, y, options.particles, ens, fs, plan, cfg);
  const double gap = out.estimates[0][0] - Fbar;
  return gap * gap;
}

}  // namespace

FilterReport filter_convergence_experiment(const ModelSpec& model,
                                           std::span<const double> eps_grid,
                                           const TestFunction& F, double Fbar,
                                           const NoisePlan& plan,
                                           const FilterExperimentOptions& options) {
  if (eps_grid.size() < 3) {
    throw std::invalid_argument("filter_convergence_experiment: need at least 3 epsilon values");
  }
  for (double e : eps_grid) {
    if (!(e > 0.0 && e <= 1.0)) {
      throw std::invalid_argument("filter_convergence_experiment: epsilon must lie in (0, 1]");
    }
  }
  if (!(options.t_eval > 0.0)) throw std::invalid_argument("t_eval must be positive");
  if (options.n_reps < 2) throw std::invalid_argument("n_reps must be >= 2");
  const TimeGrid grid = make_grid(options.t_eval, options.dt_obs);
  const std::size_t n_eps = eps_grid.size(), R = options.n_reps;
  const std::size_t arms = n_eps + (options.control ? 1 : 0);
  const ModelSpec control_model = with_zero_obs(model);
  const double eps_control = *std::max_element(eps_grid.begin(), eps_grid.end());

  std::vector<double> gaps(arms * R);
  parallel_for(arms * R, [&](std::size_t task) {
    const std::size_t a = task / R, r = task % R;
    if (a < n_eps) {
      gaps[task] = filter_gap(model, eps_grid[a], grid, F, Fbar, plan, options, r,
                              epsilon_tag(eps_grid[a]), model);
    } else {
      gaps[task] = filter_gap(control_model, eps_control, grid, F, Fbar, plan, options, r,
                              epsilon_tag(eps_control), control_model);
    }
  });

  FilterReport rep;
  rep.eps_grid.assign(eps_grid.begin(), eps_grid.end());
  rep.n_reps = R;
  rep.Fbar = Fbar;
  for (std::size_t e = 0; e < n_eps; ++e) {
    const Estimate est = mean_estimate(std::span<const double>(gaps).subspan(e * R, R));
    rep.mean_sq_gap.push_back(est.value);
    rep.std_error.push_back(est.std_error);
  }
  bool positive = true;
  for (double g : rep.mean_sq_gap) positive = positive && g > 0.0;
  rep.fitted_slope = positive ? fit_loglog(rep.eps_grid, rep.mean_sq_gap).slope
                              : std::numeric_limits<double>::quiet_NaN();
  if (options.control) {
    const Estimate est = mean_estimate(std::span<const double>(gaps).subspan(n_eps * R, R));
    rep.has_control = true;
    rep.control_eps = eps_control;
    rep.control_gap = est.value;
    rep.control_std_error = est.std_error;
  }
  return rep;
}

Estimate martingale_diagnostic(const ModelSpec& model, double epsilon, const NoisePlan& plan,
                               const DiagnosticOptions& options) {
  const TimeGrid grid = make_grid(options.T, options.dt_obs);
  const std::size_t N = options.particles, m = model.dim_obs;
  if (N < 2) throw std::invalid_argument("martingale_diagnostic: need at least 2 particles");
  ParticleCloud signal = make_fast_cloud(model, epsilon, N, grid, options.kappa, plan,
                                         {Role::filter, 0, 0, options.tag});
  ParticleCloud law = make_fast_cloud(model, epsilon, options.law_particles, grid, options.kappa,
                                      plan, {Role::law, 0, 0, options.tag});
  std::vector<Rng> ref;
  ref.reserve(N);
  for (std::size_t i = 0; i < N; ++i) ref.push_back(plan.stream({Role::reference, 0, i, options.tag}));

  const double sdt = std::sqrt(grid.dt);
  std::vector<double> logw(N, 0.0), hvals(N * m);
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    model.bind_obs(law.law())(signal.states(), hvals);
    for (std::size_t i = 0; i < N; ++i) {
      double inc = 0.0, sq = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double h = hvals[i * m + j];
        inc += h * sdt * ref[i].normal();
        sq += h * h;
      }
      logw[i] += inc - 0.5 * sq * grid.dt;
    }
    signal.advance();
    law.advance();
  }
  RunningStats st;
  for (double lw : logw) st.add(std::exp(lw));
  return st.estimate();
}

Estimate inverse_moment_diagnostic(const ModelSpec& model, double epsilon, double r,
                                   const NoisePlan& plan, const DiagnosticOptions& options) {
  if (!(r > 1.0)) throw std::invalid_argument("inverse_moment_diagnostic: r must exceed 1");
  if (options.n_reps < 2) throw std::invalid_argument("inverse_moment_diagnostic: n_reps >= 2");
  const TimeGrid grid = make_grid(options.T, options.dt_obs);
  const std::uint64_t tag = epsilon_tag(epsilon) ^ options.tag;
  std::vector<double> vals(options.n_reps);
  parallel_for(options.n_reps, [&](std::size_t rep) {
    const Ensemble ens = simulate_fast_ensemble(model, epsilon, grid, options.law_particles,
                                                options.kappa, plan, rep, tag);
    const BrownianPath w =
        sample_brownian(grid, model.dim_obs, plan, {Role::observation, rep, 0, tag});
    const SlowPath y = simulate_observation(model, ens, w, 0);
    FilterConfig cfg;
    cfg.kappa = options.kappa;
    cfg.eval_indices = {grid.n_steps};
    cfg.replication = rep;
    cfg.tag = tag;
    const FilterOutput out = particle_filter(model, epsilon, y, options.particles, ens, {}, plan, cfg);
    vals[rep] = std::exp(-r * out.log_normalizer_path.back());
  });
  return mean_estimate(vals);
}

}  // namespace mvfilter
