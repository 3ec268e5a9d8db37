#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mvfilter/measures.hpp"
#include "mvfilter/stochastics.hpp"

namespace mvfilter {

/// Coefficient evaluated on a block of points. `xs` holds k rows of n
/// coordinates; `out` receives k rows of the coefficient (n values for the
/// drift, n*d row-major values for the diffusion).
using BlockFn = std::function<void(std::span<const double> xs, std::span<double> out)>;

/// Observation drift h(x, mu) at a single point; writes m values.
using ObsFn =
    std::function<void(std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out)>;

/// h(., mu) with the law frozen: evaluates a block of points.
using BoundObs = BlockFn;
using ObsBinder = std::function<BoundObs(const EmpiricalMeasure& mu)>;

using InitialSampler = std::function<void(Rng& rng, std::span<double> x)>;

/// The coefficient triple (b, sigma, h) with its declared constants.
struct ModelSpec {
  std::string name;
  std::size_t dim_signal = 1;  // n
  std::size_t dim_noise = 1;   // d
  std::size_t dim_obs = 1;     // m

  BlockFn drift;
  BlockFn diffusion;
  ObsFn obs;
  /// Optional fast path: precomputes what h needs from a law snapshot so that
  /// many points can be evaluated cheaply. Must agree with `obs`.
  ObsBinder obs_binder;

  double lip_b_sigma = 0.0;    // L1
  double lip_h = 0.0;          // L2
  double dissipativity = 0.0;  // beta
  double obs_bound = 1.0;      // sup |h|

  std::vector<double> initial_point;
  /// Overrides `initial_point` when set.
  InitialSampler initial_sampler;

  /// Named parameters the model was built from (e.g. sigma, x0).
  std::map<std::string, double> parameters;

  /// alpha = beta - 2 L1.
  double alpha() const { return dissipativity - 2.0 * lip_b_sigma; }

  /// Dimensions, callables and positivity of the declared constants.
  void validate_structure() const;
  /// validate_structure() plus the standing assumption beta > 2 L1.
  void validate() const;

  std::vector<double> drift_at(std::span<const double> x) const;
  std::vector<double> diffusion_at(std::span<const double> x) const;
  std::vector<double> obs_at(std::span<const double> x, const EmpiricalMeasure& mu) const;
  BoundObs bind_obs(const EmpiricalMeasure& mu) const;
  void draw_initial(Rng& rng, std::span<double> x) const;
  double parameter(const std::string& key) const;
};

/// Reference model: b(x) = -x/2, sigma(x) = sigma, h(x, mu) = int sin|x + u| mu(du),
/// L1 = 1/4, L2 = 1, beta = 1, deterministic start x0.
ModelSpec example_model(double sigma, double x0);

/// Copy of `model` whose observation drift is identically zero.
ModelSpec with_zero_obs(const ModelSpec& model);
/// Copy of `model` whose observation drift is the constant vector `c`.
ModelSpec with_constant_obs(const ModelSpec& model, std::vector<double> c);

struct ModelParams {
  double sigma = 1.0;
  double x0 = 0.0;
};

/// Builds a model registered under `name` ("example6", "ou", ...).
ModelSpec make_model(const std::string& name, const ModelParams& params);
std::vector<std::string> registered_models();

using ModelFactory = std::function<ModelSpec(const ModelParams&)>;
void register_model(const std::string& name, ModelFactory factory);

/// Outcome of a sampled falsification test. Inequalities are checked as
/// LHS - RHS - tol <= 0; `worst_margin` is the largest such value.
struct HypothesisReport {
  std::string id;
  std::size_t n_pairs = 0;
  double worst_margin = 0.0;
  bool pass = false;
};

/// Relative tolerance used by the hypothesis checks: tol = 1e-12 (1 + |dx|^2).
inline constexpr double kHypothesisTolerance = 1e-12;

/// 2<dx, db> + |dsigma|^2 <= -beta |dx|^2 on pairs drawn uniformly from the
/// ball of the given radius.
HypothesisReport check_dissipativity(const ModelSpec& model, std::size_t n_pairs,
                                     double radius, std::uint64_t seed);

struct LipschitzReport {
  HypothesisReport drift_diffusion;  // |db|^2 + |dsigma|^2 <= L1 |dx|^2
  HypothesisReport obs;              // |dh|^2 <= L2 (|dx|^2 + W2^2)
};

/// Samples point pairs and, for h, pairs of small empirical clouds. Half of
/// the pairs are local perturbations (shared shift of point and cloud) since
/// that is where Lipschitz constants of law-dependent maps are attained.
LipschitzReport check_lipschitz(const ModelSpec& model, std::size_t n_pairs, double radius,
                                std::uint64_t seed, std::size_t cloud_size = 8);

/// |h(x, mu)| <= obs_bound on sampled inputs.
HypothesisReport check_obs_bound(const ModelSpec& model, std::size_t n_samples, double radius,
                                 std::uint64_t seed, std::size_t cloud_size = 8);

/// Empirical constant of 2<x, b(x)> + |sigma(x)|^2 <= -alpha |x|^2 + C: the
/// largest value of the left side plus alpha |x|^2 over the sample (the
/// origin is always included).
struct GrowthReport {
  double alpha = 0.0;
  double empirical_c = 0.0;
  std::size_t n_points = 0;
};
GrowthReport check_growth(const ModelSpec& model, std::size_t n_points, double radius,
                          std::uint64_t seed);

/// Uniform draw from the ball of the given radius in R^n.
void sample_ball(Rng& rng, double radius, std::span<double> out);

}  // namespace mvfilter
