#include <doctest.h>

#include <cmath>

#include "mvfilter/dynamics.hpp"
#include "mvfilter/stats.hpp"

using namespace mvfilter;

namespace {

ModelSpec frozen_still(double x0) {
  ModelSpec m = example_model(1.0, x0);
  m.drift = [](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  m.diffusion = m.drift;
  return m;
}

}  // namespace

TEST_CASE("micro step divides the coarse step") {
  const MicroStep s = micro_step(1e-3, 0.0625, 0.01);
  CHECK(s.dt <= 0.0625 * 0.01 * (1 + 1e-12));
  CHECK(std::abs(s.dt * static_cast<double>(s.substeps) - 1e-3) <= 1e-9 * 1e-3);
  CHECK(micro_step(1e-3, 1.0, 0.05).substeps == 1);
  CHECK(micro_step(1e-3, 0.1, 0.01).substeps == 1);
  CHECK(micro_step(1e-3, std::ldexp(1.0, -10), 0.01).substeps == 103);
  CHECK_THROWS_AS(micro_step(1e-3, 0.1, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(micro_step(1e-3, 0.0, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(micro_step(1e-3, 1.5, 0.01), std::invalid_argument);
}

TEST_CASE("ensemble matches the OU law") {
  const ModelSpec m = example_model(1.0, 0.0);
  const TimeGrid g = make_grid(0.5, 0.01);
  const double eps = 0.125;
  const std::size_t M = 4000;
  const Ensemble ens = simulate_fast_ensemble(m, eps, g, M, 0.01, NoisePlan(1));
  const EnsembleMoments mom = ensemble_moments(ens);
  for (std::size_t k = 1; k < g.size(); k += 5) {
    const GaussianLaw law = ou_law_oracle(m, eps, g.time(k));
    CHECK(std::abs(mom.mean[k] - law.mean) <= 4.0 * std::sqrt(law.variance / M));
    // variance of the sample variance of a Gaussian: 2 s^4 / (M - 1)
    CHECK(std::abs(mom.variance[k] - law.variance) <=
          5.0 * law.variance * std::sqrt(2.0 / (M - 1)) + 1e-3 * law.variance);
  }
}

TEST_CASE("ensemble relaxes to the stationary variance") {
  const ModelSpec m = example_model(1.0, 2.0);
  const TimeGrid g = make_grid(1.0, 0.1);
  const Ensemble ens = simulate_fast_ensemble(m, 0.05, g, 4000, 0.01, NoisePlan(2));
  const EnsembleMoments mom = ensemble_moments(ens);
  CHECK(mom.mean.front() == 2.0);
  CHECK(std::abs(mom.mean.back()) <= 4.0 / std::sqrt(4000.0));
  CHECK(mom.variance.back() == doctest::Approx(1.0).epsilon(5.0 * std::sqrt(2.0 / 3999)));
}

TEST_CASE("zero coefficients leave particles at rest") {
  const ModelSpec m = frozen_still(0.75);
  const Ensemble ens = simulate_fast_ensemble(m, 0.1, make_grid(1.0, 0.1), 5, 0.01, NoisePlan(3));
  for (double x : ens.states) CHECK(x == 0.75);
  const Path p = simulate_frozen(m, make_grid(1.0, 0.01), std::vector<double>{-2.0}, NoisePlan(3));
  for (double x : p.values) CHECK(x == -2.0);
}

TEST_CASE("ensemble is reproducible and rejects bad input") {
  const ModelSpec m = example_model(1.0, 0.0);
  const TimeGrid g = make_grid(0.1, 0.01);
  const auto a = simulate_fast_ensemble(m, 0.1, g, 10, 0.01, NoisePlan(4), 2, 7);
  const auto b = simulate_fast_ensemble(m, 0.1, g, 10, 0.01, NoisePlan(4), 2, 7);
  const auto c = simulate_fast_ensemble(m, 0.1, g, 10, 0.01, NoisePlan(4), 3, 7);
  CHECK(a.states == b.states);
  CHECK(a.states != c.states);
  CHECK_THROWS_AS(simulate_fast_ensemble(m, 0.1, g, 1, 0.01, NoisePlan(4)), std::invalid_argument);
  CHECK_THROWS_AS(simulate_fast_ensemble(m, 0.1, g, 10, 0.06, NoisePlan(4)), std::invalid_argument);
}

TEST_CASE("blow-up names the particle and time") {
  ModelSpec m = example_model(1.0, 1.0);
  m.drift = [](std::span<const double> xs, std::span<double> out) {
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] * xs[i] * xs[i];
  };
  try {
    simulate_frozen(m, make_grid(10.0, 0.1), std::vector<double>{5.0}, NoisePlan(0));
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    const std::string what = e.what();
    CHECK(what.find("particle 0") != std::string::npos);
    CHECK(what.find("t=") != std::string::npos);
  }
}

TEST_CASE("observation path identities") {
  const ModelSpec m = example_model(1.0, 0.0);
  const TimeGrid g = make_grid(1.0, 1e-3);
  const NoisePlan plan(5);
  const Ensemble ens = simulate_fast_ensemble(m, 0.1, g, 50, 0.01, plan);
  const BrownianPath w = sample_brownian(g, 1, plan, {Role::observation, 0, 0, 0});

  const SlowPath y0 = simulate_observation(with_zero_obs(m), ens, w);
  CHECK(y0.values == w.values);

  const double c = 0.37;
  const SlowPath yc = simulate_observation(with_constant_obs(m, {c}), ens, w);
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(std::abs(yc.values[k] - (c * g.time(k) + w.values[k])) <= 1e-12);
  }
  const std::vector<double> hbar{c};
  CHECK(simulate_averaged(hbar, w).values == yc.values);  // bit-for-bit

  const SlowPath y = simulate_observation(m, ens, w);
  CHECK(y.values[0] == 0.0);
  CHECK(std::abs(y.values.back()) <= 1.0 * g.horizon + std::abs(w.values.back()) + 1e-12);

  CHECK_THROWS_AS(simulate_observation(m, ens, sample_brownian(g, 2, plan, {})),
                  std::invalid_argument);
  CHECK_THROWS_AS(simulate_observation(m, ens, w, 50), std::invalid_argument);
}

TEST_CASE("averaged path") {
  const TimeGrid g = make_grid(2.0, 0.5);
  const BrownianPath w = sample_brownian(g, 1, NoisePlan(6), {});
  const std::vector<double> zero{0.0}, one{1.0};
  CHECK(simulate_averaged(zero, w).values == w.values);
  const SlowPath line = simulate_averaged(one, zero_brownian(g, 1));
  CHECK(line.values.back() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(simulate_averaged(std::vector<double>{1.0, 2.0}, w), std::invalid_argument);
}

TEST_CASE("frozen second moment follows dm/dt = -m + sigma^2") {
  const ModelSpec m = example_model(1.0, 1.0);
  const std::size_t R = 20000;
  ParticleCloud cloud = make_frozen_cloud(m, R, 1e-3, NoisePlan(7), {Role::frozen, 0, 0, 0});
  for (int k = 1; k <= 2000; ++k) {
    cloud.advance();
    if (k % 500 != 0) continue;
    const double t = k * 1e-3;
    RunningStats st;
    for (double x : cloud.states()) st.add(x * x);
    const double exact = std::exp(-t) + (1.0 - std::exp(-t));
    CHECK(std::abs(st.mean() - exact) <= 4.0 * st.std_error() + 1e-3);
    // moment bound m0 e^{-alpha t} + C / alpha with alpha = 1/2, C = sigma^2
    CHECK(st.mean() <= std::exp(-0.5 * t) + 2.0 + 3.0 * st.std_error());
  }
}

TEST_CASE("synchronous coupling contracts at rate e^{-t/2}") {
  const ModelSpec m = example_model(1.0, 0.0);
  const TimeGrid g = make_grid(2.0, 1e-3);
  const Path a = simulate_frozen(m, g, std::vector<double>{1.0}, NoisePlan(8));
  const Path b = simulate_frozen(m, g, std::vector<double>{0.0}, NoisePlan(8));
  const double gap = a.values.back() - b.values.back();
  CHECK(gap == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
}

TEST_CASE("OU law oracle") {
  const GaussianLaw at0 = ou_law_oracle(1.0, 2.0, 0.1, 0.0);
  CHECK(at0.mean == 2.0);
  CHECK(at0.variance == 0.0);
  const GaussianLaw far = ou_law_oracle(1.5, 2.0, 0.01, 50.0);
  CHECK(far.mean == doctest::Approx(0.0));
  CHECK(far.variance == doctest::Approx(2.25));
  const GaussianLaw mid = ou_law_oracle(1.0, 1.0, 0.1, 0.1);
  CHECK(mid.mean == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(mid.variance == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  ModelSpec other = example_model(1.0, 0.0);
  other.name = "custom";
  CHECK_THROWS_AS(ou_law_oracle(other, 0.1, 1.0), std::invalid_argument);
  CHECK_NOTHROW(ou_law_oracle(example_model(1.0, 0.0), 0.1, 1.0));
}
