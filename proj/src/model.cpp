#include "mvfilter/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace mvfilter {

void ModelSpec::validate_structure() const {
  if (dim_signal == 0 || dim_noise == 0 || dim_obs == 0) {
    throw std::invalid_argument("model " + name + ": dimensions must be positive");
  }
  if (!drift || !diffusion || !obs) {
    throw std::invalid_argument("model " + name + ": drift, diffusion and obs are required");
  }
  if (!(dissipativity > 0.0)) {
    throw std::invalid_argument("model " + name + ": beta must be positive");
  }
  if (!(lip_b_sigma >= 0.0) || !(lip_h >= 0.0)) {
    throw std::invalid_argument("model " + name + ": Lipschitz constants must be nonnegative");
  }
  if (!(obs_bound > 0.0)) {
    throw std::invalid_argument("model " + name + ": obs_bound must be positive");
  }
  if (!initial_sampler && initial_point.size() != dim_signal) {
    throw std::invalid_argument("model " + name + ": initial point has wrong dimension");
  }
}

void ModelSpec::validate() const {
  validate_structure();
  if (!(dissipativity > 2.0 * lip_b_sigma)) {
    throw std::invalid_argument("model " + name + ": need beta > 2 L1 (beta=" +
                                std::to_string(dissipativity) +
                                ", L1=" + std::to_string(lip_b_sigma) + ")");
  }
}

std::vector<double> ModelSpec::drift_at(std::span<const double> x) const {
  std::vector<double> out(dim_signal);
  drift(x, out);
  return out;
}

std::vector<double> ModelSpec::diffusion_at(std::span<const double> x) const {
  std::vector<double> out(dim_signal * dim_noise);
  diffusion(x, out);
  return out;
}

std::vector<double> ModelSpec::obs_at(std::span<const double> x,
                                      const EmpiricalMeasure& mu) const {
  std::vector<double> out(dim_obs);
  obs(x, mu, out);
  return out;
}

BoundObs ModelSpec::bind_obs(const EmpiricalMeasure& mu) const {
  if (obs_binder) return obs_binder(mu);
  auto law = std::make_shared<const EmpiricalMeasure>(mu);
  const std::size_t n = dim_signal, m = dim_obs;
  return [fn = obs, law, n, m](std::span<const double> xs, std::span<double> out) {
    const std::size_t k = xs.size() / n;
    for (std::size_t i = 0; i < k; ++i) fn(xs.subspan(i * n, n), *law, out.subspan(i * m, m));
  };
}

void ModelSpec::draw_initial(Rng& rng, std::span<double> x) const {
  if (initial_sampler) {
    initial_sampler(rng, x);
  } else {
    std::copy(initial_point.begin(), initial_point.end(), x.begin());
  }
}

double ModelSpec::parameter(const std::string& key) const {
  const auto it = parameters.find(key);
  if (it == parameters.end()) {
    throw std::invalid_argument("model " + name + " has no parameter '" + key + "'");
  }
  return it->second;
}

namespace {

// h(x, mu) = sum_j w_j sin|x + u_j| for a 1-D cloud, in O(log N) per point.
// With u sorted, the terms with u_j < -x have negative argument, so
//   h(x) = sin x (C+ - C-) + cos x (S+ - S-)
// where C, S are weighted sums of cos u_j, sin u_j over each side.
class SinAbsKernel {
 public:
  explicit SinAbsKernel(const EmpiricalMeasure& mu) {
    const std::size_t n = mu.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    const auto pts = mu.points();
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pts[a] < pts[b]; });
    u_.resize(n);
    cos_prefix_.assign(n + 1, 0.0);
    sin_prefix_.assign(n + 1, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double u = pts[idx[r]];
      const double w = mu.weight(idx[r]);
      u_[r] = u;
      cos_prefix_[r + 1] = cos_prefix_[r] + w * std::cos(u);
      sin_prefix_[r + 1] = sin_prefix_[r] + w * std::sin(u);
    }
  }

  double operator()(double x) const {
    const std::size_t split =
        static_cast<std::size_t>(std::lower_bound(u_.begin(), u_.end(), -x) - u_.begin());
    const double c = cos_prefix_.back() - 2.0 * cos_prefix_[split];
    const double s = sin_prefix_.back() - 2.0 * sin_prefix_[split];
    return std::sin(x) * c + std::cos(x) * s;
  }

 private:
  std::vector<double> u_;
  std::vector<double> cos_prefix_;
  std::vector<double> sin_prefix_;
};

void sin_abs_obs(std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out) {
  double acc = 0.0;
  const auto pts = mu.points();
  if (mu.uniform()) {
    for (double u : pts) acc += std::sin(std::abs(x[0] + u));
    out[0] = acc / static_cast<double>(pts.size());
    return;
  }
  for (std::size_t j = 0; j < pts.size(); ++j) acc += mu.weight(j) * std::sin(std::abs(x[0] + pts[j]));
  out[0] = acc;
}

BoundObs sin_abs_binder(const EmpiricalMeasure& mu) {
  auto kernel = std::make_shared<const SinAbsKernel>(mu);
  return [kernel](std::span<const double> xs, std::span<double> out) {
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (*kernel)(xs[i]);
  };
}

ModelSpec linear_model(const std::string& name, double rate, double noise, double x0) {
  ModelSpec m;
  m.name = name;
  m.drift = [rate](std::span<const double> xs, std::span<double> out) {
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = -rate * xs[i];
  };
  m.diffusion = [noise](std::span<const double> xs, std::span<double> out) {
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(xs.size()), noise);
  };
  m.obs = sin_abs_obs;
  m.obs_binder = sin_abs_binder;
  m.lip_b_sigma = rate * rate;
  m.lip_h = 1.0;
  m.dissipativity = 2.0 * rate;
  m.obs_bound = 1.0;
  m.initial_point = {x0};
  return m;
}

}  // namespace

ModelSpec example_model(double sigma, double x0) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("example_model: sigma must be positive, got " +
                                std::to_string(sigma));
  }
  if (!std::isfinite(x0)) throw std::invalid_argument("example_model: x0 must be finite");
  ModelSpec m = linear_model("example6", 0.5, sigma, x0);
  m.parameters = {{"sigma", sigma}, {"x0", x0}};
  return m;
}

ModelSpec with_zero_obs(const ModelSpec& model) {
  return with_constant_obs(model, std::vector<double>(model.dim_obs, 0.0));
}

ModelSpec with_constant_obs(const ModelSpec& model, std::vector<double> c) {
  if (c.size() != model.dim_obs) {
    throw std::invalid_argument("with_constant_obs: constant has wrong dimension");
  }
  ModelSpec out = model;
  double norm = 0.0;
  for (double v : c) norm += v * v;
  out.obs = [c](std::span<const double>, const EmpiricalMeasure&, std::span<double> o) {
    std::copy(c.begin(), c.end(), o.begin());
  };
  const std::size_t n = model.dim_signal;
  out.obs_binder = [c, n](const EmpiricalMeasure&) -> BoundObs {
    return [c, n](std::span<const double> xs, std::span<double> o) {
      const std::size_t k = xs.size() / n;
      for (std::size_t i = 0; i < k; ++i) std::copy(c.begin(), c.end(), o.begin() + static_cast<std::ptrdiff_t>(i * c.size()));
    };
  };
  out.lip_h = 0.0;
  out.obs_bound = std::max(std::sqrt(norm), 1e-300);
  out.name = model.name + (norm == 0.0 ? "+zero-obs" : "+const-obs");
  return out;
}

namespace {

std::map<std::string, ModelFactory>& registry() {
  static std::map<std::string, ModelFactory> models = {
      {"example6", [](const ModelParams& p) { return example_model(p.sigma, p.x0); }},
      {"ou",
       [](const ModelParams& p) {
         // dX = -X dt + sqrt(2) sigma dB: stationary law N(0, sigma^2). Sits on
         // the boundary beta = 2 L1, so only validate_structure() holds.
         if (!(p.sigma > 0.0)) throw std::invalid_argument("ou: sigma must be positive");
         ModelSpec m = linear_model("ou", 1.0, std::sqrt(2.0) * p.sigma, p.x0);
         m.parameters = {{"sigma", p.sigma}, {"x0", p.x0}};
         return m;
       }},
  };
  return models;
}

std::mutex& registry_mutex() {
  static std::mutex mu;
  return mu;
}

}  // namespace

ModelSpec make_model(const std::string& name, const ModelParams& params) {
  ModelFactory factory;
  {
    std::lock_guard lock(registry_mutex());
    const auto it = registry().find(name);
    if (it == registry().end()) throw std::invalid_argument("unknown model '" + name + "'");
    factory = it->second;
  }
  return factory(params);
}

std::vector<std::string> registered_models() {
  std::lock_guard lock(registry_mutex());
  std::vector<std::string> names;
  for (const auto& [name, _] : registry()) names.push_back(name);
  return names;
}

void register_model(const std::string& name, ModelFactory factory) {
  std::lock_guard lock(registry_mutex());
  registry()[name] = std::move(factory);
}

void sample_ball(Rng& rng, double radius, std::span<double> out) {
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& c : out) {
      c = rng.normal();
      norm += c * c;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(out.size()));
  for (double& c : out) c *= r / norm;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

void check_pairs(std::size_t n_pairs) {
  if (n_pairs == 0) throw std::invalid_argument("hypothesis check: n_pairs must be >= 1");
}

HypothesisReport finish(std::string id, std::size_t n, double worst) {
  HypothesisReport r;
  r.id = std::move(id);
  r.n_pairs = n;
  r.worst_margin = worst;
  r.pass = worst <= 0.0;
  return r;
}

}  // namespace

HypothesisReport check_dissipativity(const ModelSpec& model, std::size_t n_pairs,
                                     double radius, std::uint64_t seed) {
  check_pairs(n_pairs);
  model.validate_structure();
  const std::size_t n = model.dim_signal;
  Rng rng = NoisePlan(seed).stream({Role::hypothesis, 0, 0, 1});
  std::vector<double> x1(n), x2(n);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < n_pairs; ++p) {
    sample_ball(rng, radius, x1);
    sample_ball(rng, radius, x2);
    const auto b1 = model.drift_at(x1), b2 = model.drift_at(x2);
    const auto s1 = model.diffusion_at(x1), s2 = model.diffusion_at(x2);
    double inner = 0.0;
    for (std::size_t i = 0; i < n; ++i) inner += (x1[i] - x2[i]) * (b1[i] - b2[i]);
    const double dsig = sq_dist(s1, s2);
    const double dx2 = sq_dist(x1, x2);
    const double margin = 2.0 * inner + dsig + model.dissipativity * dx2 -
                          kHypothesisTolerance * (1.0 + dx2);
    worst = std::max(worst, margin);
  }
  return finish("H2_dissipativity", n_pairs, worst);
}

namespace {

EmpiricalMeasure random_cloud(Rng& rng, std::size_t dim, std::size_t size, double radius) {
  std::vector<double> pts(dim * size);
  for (std::size_t i = 0; i < size; ++i) {
    sample_ball(rng, radius, std::span<double>(pts).subspan(i * dim, dim));
  }
  return EmpiricalMeasure(dim, std::move(pts));
}

EmpiricalMeasure shifted_cloud(const EmpiricalMeasure& mu, std::span<const double> shift) {
  std::vector<double> pts(mu.points().begin(), mu.points().end());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < mu.dim(); ++j) pts[i * mu.dim() + j] += shift[j];
  }
  return EmpiricalMeasure(mu.dim(), std::move(pts));
}

}  // namespace

LipschitzReport check_lipschitz(const ModelSpec& model, std::size_t n_pairs, double radius,
                                std::uint64_t seed, std::size_t cloud_size) {
  check_pairs(n_pairs);
  model.validate_structure();
  const std::size_t n = model.dim_signal;
  Rng rng = NoisePlan(seed).stream({Role::hypothesis, 0, 0, 2});
  std::vector<double> x1(n), x2(n), shift(n), cloud_shift(n);

  double worst_bs = -std::numeric_limits<double>::infinity();
  double worst_h = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < n_pairs; ++p) {
    sample_ball(rng, radius, x1);
    const bool local = (p % 2) == 1;
    if (local) {
      // Small perturbation: the point and (with random orientation) the
      // cloud move by a shift of the same size.
      sample_ball(rng, 1e-3 * radius, shift);
      for (std::size_t i = 0; i < n; ++i) x2[i] = x1[i] + shift[i];
    } else {
      sample_ball(rng, radius, x2);
    }
    const auto b1 = model.drift_at(x1), b2 = model.drift_at(x2);
    const auto s1 = model.diffusion_at(x1), s2 = model.diffusion_at(x2);
    const double dx2 = sq_dist(x1, x2);
    const double lhs_bs = sq_dist(b1, b2) + sq_dist(s1, s2);
    worst_bs = std::max(worst_bs, lhs_bs - model.lip_b_sigma * dx2 -
                                      kHypothesisTolerance * (1.0 + dx2));

    const EmpiricalMeasure mu1 = random_cloud(rng, n, cloud_size, radius);
    EmpiricalMeasure mu2 = mu1;
    if (local) {
      const double orientation = rng.uniform() < 0.5 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < n; ++i) cloud_shift[i] = orientation * shift[i];
      mu2 = shifted_cloud(mu1, cloud_shift);
    } else if (rng.uniform() < 0.5) {
      mu2 = random_cloud(rng, n, cloud_size, radius);
    }
    const auto h1 = model.obs_at(x1, mu1), h2 = model.obs_at(x2, mu2);
    const double w2 = wasserstein2_sq(mu1, mu2);
    const double scale = dx2 + w2;
    worst_h = std::max(worst_h, sq_dist(h1, h2) - model.lip_h * scale -
                                    kHypothesisTolerance * (1.0 + scale));
  }
  return {finish("H1_lipschitz_b_sigma", n_pairs, worst_bs),
          finish("H_h_lipschitz", n_pairs, worst_h)};
}

HypothesisReport check_obs_bound(const ModelSpec& model, std::size_t n_samples, double radius,
                                 std::uint64_t seed, std::size_t cloud_size) {
  check_pairs(n_samples);
  model.validate_structure();
  const std::size_t n = model.dim_signal;
  Rng rng = NoisePlan(seed).stream({Role::hypothesis, 0, 0, 3});
  std::vector<double> x(n);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < n_samples; ++p) {
    sample_ball(rng, radius, x);
    const EmpiricalMeasure mu = random_cloud(rng, n, cloud_size, radius);
    const auto h = model.obs_at(x, mu);
    double norm = 0.0;
    for (double v : h) norm += v * v;
    worst = std::max(worst, std::sqrt(norm) - model.obs_bound -
                                kHypothesisTolerance * (1.0 + model.obs_bound));
  }
  return finish("H_h_bounded", n_samples, worst);
}

GrowthReport check_growth(const ModelSpec& model, std::size_t n_points, double radius,
                          std::uint64_t seed) {
  check_pairs(n_points);
  model.validate_structure();
  const std::size_t n = model.dim_signal;
  Rng rng = NoisePlan(seed).stream({Role::hypothesis, 0, 0, 4});
  GrowthReport report;
  report.alpha = model.alpha();
  report.n_points = n_points;
  std::vector<double> x(n, 0.0);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < n_points; ++p) {
    if (p > 0) sample_ball(rng, radius, x);
    const auto b = model.drift_at(x);
    const auto s = model.diffusion_at(x);
    double inner = 0.0, x2 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      inner += x[i] * b[i];
      x2 += x[i] * x[i];
    }
    for (double v : s) s2 += v * v;
    worst = std::max(worst, 2.0 * inner + s2 + report.alpha * x2);
  }
  report.empirical_c = worst;
  return report;
}

}  // namespace mvfilter
