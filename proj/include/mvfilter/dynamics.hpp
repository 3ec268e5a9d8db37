#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mvfilter/measures.hpp"
#include "mvfilter/model.hpp"
#include "mvfilter/stochastics.hpp"

namespace mvfilter {

/// A state became non-finite, or a particle normalizer underflowed.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Default fast micro-step factor: dt_f <= epsilon * kappa.
inline constexpr double kDefaultKappa = 0.01;
inline constexpr double kMaxKappa = 0.05;

/// Number of Euler substeps per coarse step. The micro-step is the largest
/// divisor of the coarse step that does not exceed epsilon * kappa.
struct MicroStep {
  double dt = 0.0;
  std::size_t substeps = 1;
};
MicroStep micro_step(double coarse_dt, double epsilon, double kappa);

/// A cloud of independent particles advanced by Euler-Maruyama for
///   dX = drift_scale * b(X) dt + noise_scale * sigma(X) dB.
/// Each particle owns its noise stream, keyed by its index, so clouds can be
/// rebuilt bit-identically. advance() moves every particle by one coarse step
/// (`substeps` micro-steps), which is the granularity at which laws are read.
class ParticleCloud {
 public:
  ParticleCloud(const ModelSpec& model, std::size_t count, double drift_scale,
                double noise_scale, MicroStep step, const NoisePlan& plan,
                const StreamKey& key);

  void advance();

  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }
  std::size_t steps_taken() const { return steps_; }
  double time() const { return static_cast<double>(steps_ * step_.substeps) * step_.dt; }
  MicroStep micro() const { return step_; }

  std::span<const double> states() const { return states_; }
  std::span<double> states() { return states_; }
  std::span<const double> state(std::size_t i) const {
    return {states_.data() + i * dim_, dim_};
  }
  EmpiricalMeasure law() const { return EmpiricalMeasure(dim_, states_); }

  /// Overwrites particle `dst` with the state of `src` (resampling). Noise
  /// streams stay with their slots.
  void copy_particle(std::size_t dst, std::size_t src);

 private:
  void check_finite() const;

  BlockFn drift_;
  BlockFn diffusion_;
  std::size_t count_;
  std::size_t dim_;
  std::size_t noise_dim_;
  double drift_scale_;
  double noise_scale_;
  MicroStep step_;
  std::size_t steps_ = 0;
  std::vector<double> states_;
  std::vector<Rng> rngs_;
  std::vector<double> drift_buf_;
  std::vector<double> diff_buf_;
  std::vector<double> z_;
};

/// Fast process dX = b(X)/eps dt + sigma(X)/sqrt(eps) dB on the coarse grid.
ParticleCloud make_fast_cloud(const ModelSpec& model, double epsilon, std::size_t count,
                              const TimeGrid& grid_obs, double kappa, const NoisePlan& plan,
                              const StreamKey& key);

/// Frozen process dX = b(X) dt + sigma(X) dB, one Euler step per advance().
ParticleCloud make_frozen_cloud(const ModelSpec& model, std::size_t count, double dt,
                                const NoisePlan& plan, const StreamKey& key);

/// M fast-process paths recorded on the coarse grid.
struct Ensemble {
  ModelSpec model;
  double epsilon = 1.0;
  std::size_t particles = 0;
  std::size_t dim = 1;
  TimeGrid grid_obs;
  double kappa = kDefaultKappa;
  MicroStep micro;
  /// states[(k * particles + i) * dim + j]
  std::vector<double> states;

  std::span<const double> states_at(std::size_t k) const {
    return {states.data() + k * particles * dim, particles * dim};
  }
  std::span<const double> particle_at(std::size_t k, std::size_t i) const {
    return {states.data() + (k * particles + i) * dim, dim};
  }
  /// Uniform cloud over the states at grid index k.
  EmpiricalMeasure law(std::size_t k) const {
    const auto s = states_at(k);
    return EmpiricalMeasure(dim, std::vector<double>(s.begin(), s.end()));
  }
};

/// Streams are {Role::signal, replication, particle, tag}.
Ensemble simulate_fast_ensemble(const ModelSpec& model, double epsilon, const TimeGrid& grid_obs,
                                std::size_t particles, double kappa, const NoisePlan& plan,
                                std::uint64_t replication = 0, std::uint64_t tag = 0);

/// Path of R^dim values on a grid, values[k * dim + j].
struct Path {
  TimeGrid grid;
  std::size_t dim = 1;
  std::vector<double> values;

  std::span<const double> at(std::size_t k) const { return {values.data() + k * dim, dim}; }
};

/// Observation path, Y_0 = 0.
struct SlowPath {
  TimeGrid grid;
  std::size_t dim = 1;
  std::vector<double> values;
  StreamKey noise_ref;

  std::span<const double> at(std::size_t k) const { return {values.data() + k * dim, dim}; }
  double increment(std::size_t k, std::size_t j = 0) const {
    return values[(k + 1) * dim + j] - values[k * dim + j];
  }
};

/// Y[k] = D[k] + W[k] with D[k+1] = D[k] + h[k] dt, where h[k] is produced by
/// `drift_at(k, out)`. Shared by the observation and averaged paths so a
/// constant h gives bit-identical results in both.
template <class DriftAt>
SlowPath accumulate_slow_path(const BrownianPath& w, DriftAt&& drift_at) {
  SlowPath y;
  y.grid = w.grid;
  y.dim = w.dim;
  y.values.assign(w.values.size(), 0.0);
  std::vector<double> h(w.dim), integral(w.dim, 0.0);
  for (std::size_t k = 0; k < w.grid.n_steps; ++k) {
    drift_at(k, std::span<double>(h));
    for (std::size_t j = 0; j < w.dim; ++j) {
      integral[j] += h[j] * w.grid.dt;
      y.values[(k + 1) * w.dim + j] = integral[j] + w.values[(k + 1) * w.dim + j];
    }
  }
  return y;
}

/// dY = h(X_t, law_t) dt + dW driven by particle `designated` of the
/// ensemble, with the ensemble cloud plugged in as the law.
SlowPath simulate_observation(const ModelSpec& model, const Ensemble& ensemble,
                              const BrownianPath& w, std::size_t designated = 0);

/// Ybar_t = hbar t + W_t on W's grid.
SlowPath simulate_averaged(std::span<const double> hbar, const BrownianPath& w);

/// One frozen-equation path started at x0 on `grid` (Euler step = grid dt).
Path simulate_frozen(const ModelSpec& model, const TimeGrid& grid, std::span<const double> x0,
                     const NoisePlan& plan, const StreamKey& key = {Role::frozen, 0, 0, 0});

/// Law of X^eps_t for the reference model: mean x0 e^{-t/(2 eps)},
/// variance sigma^2 (1 - e^{-t/eps}).
struct GaussianLaw {
  double mean = 0.0;
  double variance = 0.0;
};
GaussianLaw ou_law_oracle(double sigma, double x0, double epsilon, double t);
/// Same, reading sigma and x0 from a reference model; rejects other models.
GaussianLaw ou_law_oracle(const ModelSpec& model, double epsilon, double t);

/// Per-time mean and variance of coordinate 0 of an ensemble.
struct EnsembleMoments {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> variance;
  std::size_t particles = 0;
};
EnsembleMoments ensemble_moments(const Ensemble& ensemble);

}  // namespace mvfilter
