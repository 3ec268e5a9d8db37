#include "mvfilter/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace mvfilter {

MicroStep micro_step(double coarse_dt, double epsilon, double kappa) {
  if (!(epsilon > 0.0) || epsilon > 1.0) {
    throw std::invalid_argument("epsilon must lie in (0, 1], got " + std::to_string(epsilon));
  }
  if (!(kappa > 0.0) || kappa > kMaxKappa) {
    throw std::invalid_argument("kappa must lie in (0, " + std::to_string(kMaxKappa) +
                                "], got " + std::to_string(kappa));
  }
  if (!(coarse_dt > 0.0)) throw std::invalid_argument("coarse step must be positive");
  const double target = epsilon * kappa;
  MicroStep step;
  step.substeps = static_cast<std::size_t>(std::ceil(coarse_dt / target * (1.0 - 1e-12)));
  step.substeps = std::max<std::size_t>(step.substeps, 1);
  step.dt = coarse_dt / static_cast<double>(step.substeps);
  return step;
}

ParticleCloud::ParticleCloud(const ModelSpec& model, std::size_t count, double drift_scale,
                             double noise_scale, MicroStep step, const NoisePlan& plan,
                             const StreamKey& key)
    : drift_(model.drift),
      diffusion_(model.diffusion),
      count_(count),
      dim_(model.dim_signal),
      noise_dim_(model.dim_noise),
      drift_scale_(drift_scale),
      noise_scale_(noise_scale),
      step_(step) {
  model.validate_structure();
  if (count_ == 0) throw std::invalid_argument("particle cloud: count must be >= 1");
  states_.resize(count_ * dim_);
  rngs_.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i) {
    rngs_.push_back(plan.stream(key.with_particle(i)));
    model.draw_initial(rngs_.back(), std::span<double>(states_).subspan(i * dim_, dim_));
  }
  drift_buf_.resize(count_ * dim_);
  diff_buf_.resize(count_ * dim_ * noise_dim_);
  z_.resize(noise_dim_);
}

void ParticleCloud::advance() {
  const double a = drift_scale_ * step_.dt;
  const double c = noise_scale_ * std::sqrt(step_.dt);
  for (std::size_t s = 0; s < step_.substeps; ++s) {
    drift_(states_, drift_buf_);
    diffusion_(states_, diff_buf_);
    if (dim_ == 1 && noise_dim_ == 1) {
      for (std::size_t i = 0; i < count_; ++i) {
        states_[i] += a * drift_buf_[i] + c * diff_buf_[i] * rngs_[i].normal();
      }
      continue;
    }
    for (std::size_t i = 0; i < count_; ++i) {
      rngs_[i].fill_normal(z_);
      for (std::size_t r = 0; r < dim_; ++r) {
        const double* sig = diff_buf_.data() + (i * dim_ + r) * noise_dim_;
        double noise = 0.0;
        for (std::size_t j = 0; j < noise_dim_; ++j) noise += sig[j] * z_[j];
        states_[i * dim_ + r] += a * drift_buf_[i * dim_ + r] + c * noise;
      }
    }
  }
  ++steps_;
  check_finite();
}

void ParticleCloud::check_finite() const {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (!std::isfinite(states_[i])) {
      std::ostringstream msg;
      msg << "blow-up: particle " << i / dim_ << " became non-finite at t=" << time()
          << " (coarse step " << steps_ << ")";
      throw NumericalError(msg.str());
    }
  }
}

void ParticleCloud::copy_particle(std::size_t dst, std::size_t src) {
  std::copy_n(states_.begin() + static_cast<std::ptrdiff_t>(src * dim_), dim_,
              states_.begin() + static_cast<std::ptrdiff_t>(dst * dim_));
}

ParticleCloud make_fast_cloud(const ModelSpec& model, double epsilon, std::size_t count,
                              const TimeGrid& grid_obs, double kappa, const NoisePlan& plan,
                              const StreamKey& key) {
  const MicroStep step = micro_step(grid_obs.dt, epsilon, kappa);
  return ParticleCloud(model, count, 1.0 / epsilon, 1.0 / std::sqrt(epsilon), step, plan, key);
}

ParticleCloud make_frozen_cloud(const ModelSpec& model, std::size_t count, double dt,
                                const NoisePlan& plan, const StreamKey& key) {
  if (!(dt > 0.0)) throw std::invalid_argument("frozen cloud: dt must be positive");
  return ParticleCloud(model, count, 1.0, 1.0, MicroStep{dt, 1}, plan, key);
}

Ensemble simulate_fast_ensemble(const ModelSpec& model, double epsilon, const TimeGrid& grid_obs,
                                std::size_t particles, double kappa, const NoisePlan& plan,
                                std::uint64_t replication, std::uint64_t tag) {
  if (particles < 2) throw std::invalid_argument("ensemble: need at least 2 particles");
  ParticleCloud cloud = make_fast_cloud(model, epsilon, particles, grid_obs, kappa, plan,
                                        {Role::signal, replication, 0, tag});
  Ensemble ens;
  ens.model = model;
  ens.epsilon = epsilon;
  ens.particles = particles;
  ens.dim = model.dim_signal;
  ens.grid_obs = grid_obs;
  ens.kappa = kappa;
  ens.micro = cloud.micro();
  ens.states.reserve(grid_obs.size() * particles * ens.dim);
  auto record = [&] {
    const auto s = cloud.states();
    ens.states.insert(ens.states.end(), s.begin(), s.end());
  };
  record();
  for (std::size_t k = 0; k < grid_obs.n_steps; ++k) {
    cloud.advance();
    record();
  }
  return ens;
}

namespace {

void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* what) {
  if (a.n_steps != b.n_steps || std::abs(a.horizon - b.horizon) > 1e-12 * a.horizon) {
    throw std::invalid_argument(std::string(what) + ": grids do not match");
  }
}

}  // namespace

SlowPath simulate_observation(const ModelSpec& model, const Ensemble& ensemble,
                              const BrownianPath& w, std::size_t designated) {
  require_same_grid(ensemble.grid_obs, w.grid, "simulate_observation");
  if (w.dim != model.dim_obs) {
    throw std::invalid_argument("simulate_observation: W has dimension " + std::to_string(w.dim) +
                                ", h has " + std::to_string(model.dim_obs));
  }
  if (designated >= ensemble.particles) {
    throw std::invalid_argument("simulate_observation: designated particle out of range");
  }
  return accumulate_slow_path(w, [&](std::size_t k, std::span<double> h) {
    model.obs(ensemble.particle_at(k, designated), ensemble.law(k), h);
  });
}

SlowPath simulate_averaged(std::span<const double> hbar, const BrownianPath& w) {
  if (hbar.size() != w.dim) {
    throw std::invalid_argument("simulate_averaged: hbar and W dimensions differ");
  }
  return accumulate_slow_path(w, [&](std::size_t, std::span<double> h) {
    std::copy(hbar.begin(), hbar.end(), h.begin());
  });
}

Path simulate_frozen(const ModelSpec& model, const TimeGrid& grid, std::span<const double> x0,
                     const NoisePlan& plan, const StreamKey& key) {
  if (x0.size() != model.dim_signal) {
    throw std::invalid_argument("simulate_frozen: x0 has wrong dimension");
  }
  ModelSpec started = model;
  started.initial_sampler = nullptr;
  started.initial_point.assign(x0.begin(), x0.end());
  ParticleCloud cloud = make_frozen_cloud(started, 1, grid.dt, plan, key);
  Path path;
  path.grid = grid;
  path.dim = model.dim_signal;
  path.values.reserve(grid.size() * path.dim);
  path.values.insert(path.values.end(), x0.begin(), x0.end());
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    cloud.advance();
    const auto s = cloud.states();
    path.values.insert(path.values.end(), s.begin(), s.end());
  }
  return path;
}

GaussianLaw ou_law_oracle(double sigma, double x0, double epsilon, double t) {
  if (!(sigma > 0.0) || !(epsilon > 0.0) || t < 0.0) {
    throw std::invalid_argument("ou_law_oracle: need sigma > 0, epsilon > 0, t >= 0");
  }
  return {x0 * std::exp(-t / (2.0 * epsilon)), sigma * sigma * -std::expm1(-t / epsilon)};
}

GaussianLaw ou_law_oracle(const ModelSpec& model, double epsilon, double t) {
  if (model.name.rfind("example6", 0) != 0 || !model.parameters.count("sigma")) {
    throw std::invalid_argument("ou_law_oracle: model '" + model.name +
                                "' is not the reference linear model");
  }
  return ou_law_oracle(model.parameter("sigma"), model.parameter("x0"), epsilon, t);
}

EnsembleMoments ensemble_moments(const Ensemble& ensemble) {
  EnsembleMoments out;
  out.particles = ensemble.particles;
  const double m = static_cast<double>(ensemble.particles);
  for (std::size_t k = 0; k < ensemble.grid_obs.size(); ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < ensemble.particles; ++i) mean += ensemble.particle_at(k, i)[0];
    mean /= m;
    double var = 0.0;
    for (std::size_t i = 0; i < ensemble.particles; ++i) {
      const double d = ensemble.particle_at(k, i)[0] - mean;
      var += d * d;
    }
    out.times.push_back(ensemble.grid_obs.time(k));
    out.mean.push_back(mean);
    out.variance.push_back(var / (m - 1.0));
  }
  return out;
}

}  // namespace mvfilter
