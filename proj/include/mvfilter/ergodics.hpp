#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvfilter/dynamics.hpp"
#include "mvfilter/measures.hpp"
#include "mvfilter/model.hpp"
#include "mvfilter/stats.hpp"
#include "mvfilter/stochastics.hpp"

namespace mvfilter {

/// nu-hat: thinned states of one long frozen trajectory.
struct InvariantSample {
  EmpiricalMeasure cloud;
  double burn_in = 0.0;
  double thinning = 0.0;
  std::size_t n_samples = 0;
  double dt = 0.0;
  std::string model;
  std::uint64_t seed = 0;
};

struct InvariantOptions {
  double burn_in = -1.0;   // < 0: 10 / beta
  double thinning = -1.0;  // < 0: 1 / beta
  std::size_t n_samples = 4096;
  double dt = 1e-3;
  std::uint64_t tag = 0;
};

/// Rejects burn_in < 5 / beta and n_samples < 100.
InvariantSample sample_invariant(const ModelSpec& model, const NoisePlan& plan,
                                 const InvariantOptions& options = {});

/// Vector-valued estimate; std_error is per coordinate.
struct VectorEstimate {
  std::vector<double> value;
  std::vector<double> std_error;
};

/// A functional of a cloud together with its delete-block jackknife
/// standard error. Blocks are contiguous in sample order, so serial
/// correlation along the nu-hat trajectory is absorbed, and the law argument
/// is re-evaluated on every deleted cloud so V-statistic effects are too.
using CloudFunctional = std::function<std::vector<double>(const EmpiricalMeasure&)>;
VectorEstimate jackknife(const EmpiricalMeasure& cloud, const CloudFunctional& fn,
                         std::size_t n_blocks = 128);

/// hbar = (1/N) sum_i h(x_i, nu-hat).
VectorEstimate compute_hbar(const ModelSpec& model, const InvariantSample& nu);

/// Scalar test function F(x, mu) with an optional law-binding fast path.
struct TestFunction {
  using Eval = std::function<double(std::span<const double> x, const EmpiricalMeasure& mu)>;
  using Bound = std::function<void(std::span<const double> xs, std::span<double> out)>;
  using Binder = std::function<Bound(const EmpiricalMeasure& mu)>;

  std::string name;
  Eval eval;
  Binder binder;
  double bound = 0.0;  // sup |F|; 0 when unbounded
  double eta = 1.0;
  bool law_free = false;

  /// Evaluates F(., mu) on a block of points of dimension mu.dim().
  Bound bind(const EmpiricalMeasure& mu) const;
};

/// F1 = sin(x + mean(mu)), F2 = cos(x) / (1 + mu(|.|^2)), F3 = x exp(-x^2).
TestFunction test_function(const std::string& name);
std::vector<TestFunction> bundled_test_functions();
TestFunction constant_test_function(double c);

/// Fbar = (1/N) sum_i F(x_i, nu-hat).
Estimate compute_Fbar(const TestFunction& F, const InvariantSample& nu);

/// An observed decay quantity against its analytic bound on a time grid.
struct DecayCurve {
  std::vector<double> times;
  std::vector<double> observed;
  std::vector<double> bound;
  std::vector<double> std_error;
  /// Slope of log(observed) on t over points with observed >= 5 std_error.
  double fitted_exponent = 0.0;
  std::size_t fit_points = 0;
};

/// Fits the exponent of `curve` in place.
void fit_decay(DecayCurve& curve);

struct DecayOptions {
  double dt = 1e-3;         // Euler step of the frozen equation
  double record_dt = 0.25;  // spacing of the reported times
  std::size_t n_reps = 4096;
  std::size_t bootstrap = 20;
  std::uint64_t tag = 0;
};

/// Synchronous coupling from x1 and x2: E|X^x1_t - X^x2_t|^2 against
/// |x1 - x2|^2 e^{-beta t}.
DecayCurve contraction_experiment(const ModelSpec& model, std::span<const double> x1,
                                  std::span<const double> x2, double T, const NoisePlan& plan,
                                  const DecayOptions& options = {});

/// E|X_t|^2 from the model's initial law against E|xi|^2 e^{-alpha t} + C / alpha.
DecayCurve moment_bound_experiment(const ModelSpec& model, double growth_c, double T,
                                   const NoisePlan& plan, const DecayOptions& options = {});

/// W2^2(law of X_t, nu-hat) against 2 e^{-beta t} (E|xi|^2 + nu(|.|^2)). The
/// error is a bootstrap over both clouds. 1-D or clouds small enough for the
/// assignment solver only.
DecayCurve w2_decay_experiment(const ModelSpec& model, const InvariantSample& nu, double T,
                               const NoisePlan& plan, const DecayOptions& options = {});

/// |E h(X_t, nu-hat) - hbar|^2 against 2 L2 e^{-beta t} (E|xi|^2 + nu(|.|^2)).
/// Coordinates are summed; `hbar_se` enters the error.
DecayCurve hbar_decay_experiment(const ModelSpec& model, const InvariantSample& nu,
                                 const VectorEstimate& hbar, double T, const NoisePlan& plan,
                                 const DecayOptions& options = {});

}  // namespace mvfilter
