#include "mvfilter/ergodics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace mvfilter {

InvariantSample sample_invariant(const ModelSpec& model, const NoisePlan& plan,
                                 const InvariantOptions& options) {
  model.validate_structure();
  const double beta = model.dissipativity;
  const double burn_in = options.burn_in < 0.0 ? 10.0 / beta : options.burn_in;
  const double thinning = options.thinning < 0.0 ? 1.0 / beta : options.thinning;
  if (burn_in < 5.0 / beta * (1.0 - 1e-12)) {
    std::ostringstream msg;
    msg << "sample_invariant: burn_in " << burn_in << " is below 5/beta = " << 5.0 / beta
        << " (beta = " << beta << "); the start would still bias nu-hat by e^{-beta t}";
    throw std::invalid_argument(msg.str());
  }
  if (options.n_samples < 100) {
    throw std::invalid_argument("sample_invariant: n_samples must be >= 100");
  }
  if (!(options.dt > 0.0) || !(thinning > 0.0)) {
    throw std::invalid_argument("sample_invariant: dt and thinning must be positive");
  }
  const auto burn_steps = static_cast<std::size_t>(std::llround(burn_in / options.dt));
  const auto thin_steps =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(thinning / options.dt)));

  ParticleCloud walker(model, 1, 1.0, 1.0, MicroStep{options.dt, 1}, plan,
                       {Role::invariant, 0, 0, options.tag});
  for (std::size_t s = 0; s < burn_steps; ++s) walker.advance();

  const std::size_t n = model.dim_signal;
  std::vector<double> points;
  points.reserve(options.n_samples * n);
  for (std::size_t i = 0; i < options.n_samples; ++i) {
    for (std::size_t s = 0; s < thin_steps; ++s) walker.advance();
    const auto x = walker.state(0);
    points.insert(points.end(), x.begin(), x.end());
  }
  InvariantSample out;
  out.cloud = EmpiricalMeasure(n, std::move(points));
  out.burn_in = static_cast<double>(burn_steps) * options.dt;
  out.thinning = static_cast<double>(thin_steps) * options.dt;
  out.n_samples = options.n_samples;
  out.dt = options.dt;
  out.model = model.name;
  out.seed = plan.master_seed();
  return out;
}

namespace {

EmpiricalMeasure without_block(const EmpiricalMeasure& cloud, std::size_t lo, std::size_t hi) {
  const std::size_t n = cloud.dim();
  const auto pts = cloud.points();
  std::vector<double> kept;
  kept.reserve(pts.size() - (hi - lo) * n);
  kept.insert(kept.end(), pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(lo * n));
  kept.insert(kept.end(), pts.begin() + static_cast<std::ptrdiff_t>(hi * n), pts.end());
  if (cloud.uniform()) return EmpiricalMeasure(n, std::move(kept));

  std::vector<double> w;
  w.reserve(cloud.size() - (hi - lo));
  double total = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (i >= lo && i < hi) continue;
    w.push_back(cloud.weight(i));
    total += cloud.weight(i);
  }
  for (double& x : w) x /= total;
  return EmpiricalMeasure(n, std::move(kept), std::move(w));
}

double mean_sq_norm(std::span<const double> xs, std::size_t dim) {
  const std::size_t k = xs.size() / dim;
  double s = 0.0;
  for (double x : xs) s += x * x;
  return s / static_cast<double>(k);
}

}  // namespace

VectorEstimate jackknife(const EmpiricalMeasure& cloud, const CloudFunctional& fn,
                         std::size_t n_blocks) {
  const std::size_t n = cloud.size();
  VectorEstimate out;
  out.value = fn(cloud);
  out.std_error.assign(out.value.size(), 0.0);
  const std::size_t blocks = std::min(n_blocks, n);
  if (blocks < 2) return out;

  std::vector<std::vector<double>> loo(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    loo[b] = fn(without_block(cloud, b * n / blocks, (b + 1) * n / blocks));
  }
  const double nb = static_cast<double>(blocks);
  for (std::size_t j = 0; j < out.value.size(); ++j) {
    double mean = 0.0;
    for (const auto& v : loo) mean += v[j];
    mean /= nb;
    double ss = 0.0;
    for (const auto& v : loo) ss += (v[j] - mean) * (v[j] - mean);
    out.std_error[j] = std::sqrt((nb - 1.0) / nb * ss);
  }
  return out;
}

VectorEstimate compute_hbar(const ModelSpec& model, const InvariantSample& nu) {
  const std::size_t m = model.dim_obs;
  return jackknife(nu.cloud, [&](const EmpiricalMeasure& mu) {
    const auto h = model.bind_obs(mu);
    std::vector<double> vals(mu.size() * m);
    h(mu.points(), vals);
    std::vector<double> acc(m, 0.0);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      for (std::size_t j = 0; j < m; ++j) acc[j] += mu.weight(i) * vals[i * m + j];
    }
    return acc;
  });
}

TestFunction::Bound TestFunction::bind(const EmpiricalMeasure& mu) const {
  if (binder) return binder(mu);
  auto law = std::make_shared<const EmpiricalMeasure>(mu);
  return [f = eval, law](std::span<const double> xs, std::span<double> out) {
    const std::size_t n = law->dim();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xs.subspan(i * n, n), *law);
  };
}

TestFunction test_function(const std::string& name) {
  TestFunction f;
  f.name = name;
  if (name == "F1") {
    f.eval = [](std::span<const double> x, const EmpiricalMeasure& mu) {
      return std::sin(x[0] + mu.mean()[0]);
    };
    f.binder = [](const EmpiricalMeasure& mu) -> TestFunction::Bound {
      const double m = mu.mean()[0];
      const std::size_t n = mu.dim();
      return [m, n](std::span<const double> xs, std::span<double> out) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sin(xs[i * n] + m);
      };
    };
    f.bound = 1.0;
  } else if (name == "F2") {
    f.eval = [](std::span<const double> x, const EmpiricalMeasure& mu) {
      return std::cos(x[0]) / (1.0 + second_moment(mu));
    };
    f.binder = [](const EmpiricalMeasure& mu) -> TestFunction::Bound {
      const double scale = 1.0 / (1.0 + second_moment(mu));
      const std::size_t n = mu.dim();
      return [scale, n](std::span<const double> xs, std::span<double> out) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::cos(xs[i * n]) * scale;
      };
    };
    f.bound = 1.0;
  } else if (name == "F3") {
    f.eval = [](std::span<const double> x, const EmpiricalMeasure&) {
      return x[0] * std::exp(-x[0] * x[0]);
    };
    f.binder = [](const EmpiricalMeasure& mu) -> TestFunction::Bound {
      const std::size_t n = mu.dim();
      return [n](std::span<const double> xs, std::span<double> out) {
        for (std::size_t i = 0; i < out.size(); ++i) {
          const double x = xs[i * n];
          out[i] = x * std::exp(-x * x);
        }
      };
    };
    f.bound = 1.0 / std::sqrt(2.0 * std::exp(1.0));
    f.law_free = true;
  } else {
    throw std::invalid_argument("unknown test function '" + name + "' (expected F1, F2 or F3)");
  }
  return f;
}

std::vector<TestFunction> bundled_test_functions() {
  return {test_function("F1"), test_function("F2"), test_function("F3")};
}

TestFunction constant_test_function(double c) {
  TestFunction f;
  f.name = "const";
  f.eval = [c](std::span<const double>, const EmpiricalMeasure&) { return c; };
  f.binder = [c](const EmpiricalMeasure&) -> TestFunction::Bound {
    return [c](std::span<const double>, std::span<double> out) {
      std::fill(out.begin(), out.end(), c);
    };
  };
  f.bound = std::abs(c);
  f.law_free = true;
  return f;
}

Estimate compute_Fbar(const TestFunction& F, const InvariantSample& nu) {
  const auto est = jackknife(nu.cloud, [&](const EmpiricalMeasure& mu) {
    const auto f = F.bind(mu);
    std::vector<double> vals(mu.size());
    f(mu.points(), vals);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) acc += mu.weight(i) * vals[i];
    return std::vector<double>{acc};
  });
  return {est.value[0], est.std_error[0]};
}

void fit_decay(DecayCurve& curve) {
  std::vector<double> t, y;
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    const double obs = curve.observed[k];
    if (obs > 0.0 && std::isfinite(obs) && obs >= 5.0 * curve.std_error[k]) {
      t.push_back(curve.times[k]);
      y.push_back(std::log(obs));
    }
  }
  curve.fit_points = t.size();
  curve.fitted_exponent =
      t.size() >= 2 ? fit_line(t, y).slope : std::numeric_limits<double>::quiet_NaN();
}

namespace {

struct RecordPlan {
  TimeGrid grid;
  std::size_t stride = 1;
};

RecordPlan record_plan(double T, const DecayOptions& options) {
  RecordPlan rp;
  rp.grid = make_grid(T, options.dt);
  rp.stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(options.record_dt / rp.grid.dt)));
  return rp;
}

ModelSpec started_at(const ModelSpec& model, std::span<const double> x0) {
  ModelSpec m = model;
  m.initial_sampler = nullptr;
  m.initial_point.assign(x0.begin(), x0.end());
  return m;
}

// Runs `cloud` over the grid and calls visit(t) at t = 0 and every stride.
template <class Visit>
void run_recorded(ParticleCloud& cloud, const RecordPlan& rp, Visit&& visit) {
  visit(0.0);
  for (std::size_t k = 1; k <= rp.grid.n_steps; ++k) {
    cloud.advance();
    if (k % rp.stride == 0) visit(rp.grid.time(k));
  }
}

}  // namespace

DecayCurve contraction_experiment(const ModelSpec& model, std::span<const double> x1,
                                  std::span<const double> x2, double T, const NoisePlan& plan,
                                  const DecayOptions& options) {
  const std::size_t n = model.dim_signal;
  if (x1.size() != n || x2.size() != n) {
    throw std::invalid_argument("contraction_experiment: start points have wrong dimension");
  }
  const RecordPlan rp = record_plan(T, options);
  const StreamKey key{Role::frozen, 0, 0, options.tag};
  // Same key: both clouds consume identical noise (synchronous coupling).
  ParticleCloud a = make_frozen_cloud(started_at(model, x1), options.n_reps, rp.grid.dt, plan, key);
  ParticleCloud b = make_frozen_cloud(started_at(model, x2), options.n_reps, rp.grid.dt, plan, key);

  double d0 = 0.0;
  for (std::size_t j = 0; j < n; ++j) d0 += (x1[j] - x2[j]) * (x1[j] - x2[j]);

  DecayCurve curve;
  auto visit = [&](double t) {
    RunningStats st;
    const auto sa = a.states(), sb = b.states();
    for (std::size_t i = 0; i < options.n_reps; ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double diff = sa[i * n + j] - sb[i * n + j];
        d += diff * diff;
      }
      st.add(d);
    }
    curve.times.push_back(t);
    curve.observed.push_back(st.mean());
    curve.bound.push_back(d0 * std::exp(-model.dissipativity * t));
    curve.std_error.push_back(st.std_error());
  };
  visit(0.0);
  for (std::size_t k = 1; k <= rp.grid.n_steps; ++k) {
    a.advance();
    b.advance();
    if (k % rp.stride == 0) visit(rp.grid.time(k));
  }
  fit_decay(curve);
  return curve;
}

DecayCurve moment_bound_experiment(const ModelSpec& model, double growth_c, double T,
                                   const NoisePlan& plan, const DecayOptions& options) {
  const RecordPlan rp = record_plan(T, options);
  ParticleCloud cloud = make_frozen_cloud(model, options.n_reps, rp.grid.dt, plan,
                                          {Role::frozen, 0, 0, options.tag});
  const std::size_t n = model.dim_signal;
  const double alpha = model.alpha();
  const double m0 = mean_sq_norm(cloud.states(), n);

  DecayCurve curve;
  run_recorded(cloud, rp, [&](double t) {
    RunningStats st;
    const auto s = cloud.states();
    for (std::size_t i = 0; i < options.n_reps; ++i) {
      double r = 0.0;
      for (std::size_t j = 0; j < n; ++j) r += s[i * n + j] * s[i * n + j];
      st.add(r);
    }
    curve.times.push_back(t);
    curve.observed.push_back(st.mean());
    curve.bound.push_back(m0 * std::exp(-alpha * t) + growth_c / alpha);
    curve.std_error.push_back(st.std_error());
  });
  fit_decay(curve);
  return curve;
}

DecayCurve w2_decay_experiment(const ModelSpec& model, const InvariantSample& nu, double T,
                               const NoisePlan& plan, const DecayOptions& options) {
  const std::size_t n = model.dim_signal;
  if (nu.cloud.dim() != n) throw std::invalid_argument("w2_decay_experiment: nu dimension");
  if (n > 1 && (options.n_reps != nu.cloud.size() || options.n_reps > kAssignmentMaxSize)) {
    throw std::invalid_argument(
        "w2_decay_experiment: exact W2 in dimension > 1 needs equal clouds of at most " +
        std::to_string(kAssignmentMaxSize) + " points");
  }
  const RecordPlan rp = record_plan(T, options);
  ParticleCloud cloud = make_frozen_cloud(model, options.n_reps, rp.grid.dt, plan,
                                          {Role::frozen, 0, 0, options.tag});
  const double m0 = mean_sq_norm(cloud.states(), n);
  const double nu_m2 = second_moment(nu.cloud);
  const auto nu_pts = nu.cloud.points();
  const std::size_t nu_n = nu.cloud.size();

  DecayCurve curve;
  std::size_t visit_index = 0;
  run_recorded(cloud, rp, [&](double t) {
    const auto s = cloud.states();
    const EmpiricalMeasure law(n, std::vector<double>(s.begin(), s.end()));
    curve.times.push_back(t);
    curve.observed.push_back(wasserstein2_sq(law, nu.cloud));
    curve.bound.push_back(2.0 * std::exp(-model.dissipativity * t) * (m0 + nu_m2));

    Rng rng = plan.stream({Role::bootstrap, visit_index++, 0, options.tag});
    RunningStats boot;
    std::vector<double> pa(s.size()), pb(nu_pts.size());
    for (std::size_t r = 0; r < options.bootstrap; ++r) {
      for (std::size_t i = 0; i < options.n_reps; ++i) {
        const std::size_t src = rng.bits() % options.n_reps;
        std::copy_n(s.begin() + static_cast<std::ptrdiff_t>(src * n), n, pa.begin() + static_cast<std::ptrdiff_t>(i * n));
      }
      for (std::size_t i = 0; i < nu_n; ++i) {
        const std::size_t src = rng.bits() % nu_n;
        std::copy_n(nu_pts.begin() + static_cast<std::ptrdiff_t>(src * n), n, pb.begin() + static_cast<std::ptrdiff_t>(i * n));
      }
      boot.add(wasserstein2_sq(EmpiricalMeasure(n, pa), EmpiricalMeasure(n, pb)));
    }
    curve.std_error.push_back(std::sqrt(boot.variance()));
  });
  fit_decay(curve);
  return curve;
}

DecayCurve hbar_decay_experiment(const ModelSpec& model, const InvariantSample& nu,
                                 const VectorEstimate& hbar, double T, const NoisePlan& plan,
                                 const DecayOptions& options) {
  const std::size_t n = model.dim_signal, m = model.dim_obs;
  if (hbar.value.size() != m) throw std::invalid_argument("hbar_decay_experiment: hbar dim");
  const RecordPlan rp = record_plan(T, options);
  ParticleCloud cloud = make_frozen_cloud(model, options.n_reps, rp.grid.dt, plan,
                                          {Role::frozen, 0, 0, options.tag});
  const double m0 = mean_sq_norm(cloud.states(), n);
  const double nu_m2 = second_moment(nu.cloud);
  const auto h = model.bind_obs(nu.cloud);
  std::vector<double> vals(options.n_reps * m);

  DecayCurve curve;
  run_recorded(cloud, rp, [&](double t) {
    h(cloud.states(), vals);
    double obs = 0.0, var_obs = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      RunningStats st;
      for (std::size_t i = 0; i < options.n_reps; ++i) st.add(vals[i * m + j]);
      const double gap = st.mean() - hbar.value[j];
      const double var = st.std_error() * st.std_error() + hbar.std_error[j] * hbar.std_error[j];
      obs += gap * gap;
      var_obs += 4.0 * gap * gap * var + 2.0 * var * var;
    }
    curve.times.push_back(t);
    curve.observed.push_back(obs);
    curve.bound.push_back(2.0 * model.lip_h * std::exp(-model.dissipativity * t) *
                          (m0 + nu_m2));
    curve.std_error.push_back(std::sqrt(var_obs));
  });
  fit_decay(curve);
  return curve;
}

}  // namespace mvfilter
