#include <doctest.h>

#include <cmath>

#include "mvfilter/stats.hpp"
#include "mvfilter/stochastics.hpp"

using namespace mvfilter;

TEST_CASE("make_grid step counts") {
  CHECK(make_grid(1.0, 0.25).n_steps == 4);
  CHECK(make_grid(1.0, 1.0).n_steps == 1);
  CHECK(make_grid(2.0, 1e-4).n_steps == 20000);
  const TimeGrid g = make_grid(2.0, 1e-4);
  CHECK(g.time(g.n_steps) == 2.0);
  CHECK(std::abs(g.dt * static_cast<double>(g.n_steps) - 2.0) <= 1e-12 * 2.0);
}

TEST_CASE("make_grid rejects bad steps") {
  CHECK_THROWS_AS(make_grid(1.0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(-1.0, 0.1), std::invalid_argument);
}

TEST_CASE("grid_index") {
  const TimeGrid g = make_grid(1.0, 1e-3);
  CHECK(grid_index(g, 0.0) == 0);
  CHECK(grid_index(g, 1.0) == 1000);
  CHECK(grid_index(g, 0.5) == 500);
}

TEST_CASE("brownian path starts at zero and is reproducible") {
  const NoisePlan plan(7);
  const TimeGrid g = make_grid(1.0, 0.01);
  const StreamKey key{Role::observation, 3, 0, 0};
  const BrownianPath a = sample_brownian(g, 2, plan, key);
  const BrownianPath b = sample_brownian(g, 2, plan, key);
  CHECK(a.values[0] == 0.0);
  CHECK(a.values[1] == 0.0);
  CHECK(a.values == b.values);
  const BrownianPath c = sample_brownian(g, 2, plan, {Role::observation, 4, 0, 0});
  CHECK(a.values != c.values);
}

TEST_CASE("brownian increments have variance dt") {
  const TimeGrid g = make_grid(1.0, 1e-6);
  const BrownianPath w = sample_brownian(g, 1, NoisePlan(11), {Role::observation, 0, 0, 0});
  RunningStats st;
  for (std::size_t k = 0; k < g.n_steps; ++k) st.add(w.increment(k));
  // chi-square band for 10^6 increments
  CHECK(std::abs(st.variance() / g.dt - 1.0) <= 3.0 * std::sqrt(2.0 / 1e6));
}

TEST_CASE("signal and observation streams are uncorrelated") {
  const NoisePlan plan(5);
  Rng b = plan.stream({Role::signal, 0, 0, 0});
  Rng w = plan.stream({Role::observation, 0, 0, 0});
  const int n = 100000;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = b.normal(), y = w.normal();
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  CHECK(std::abs(sxy / std::sqrt(sxx * syy)) <= 4.0 / std::sqrt(1e5));
}

TEST_CASE("stream seeds separate every key field") {
  const NoisePlan plan(0);
  const StreamKey base{Role::signal, 1, 2, 3};
  const auto s = plan.stream_seed(base);
  CHECK(s != plan.stream_seed(base.with_role(Role::law)));
  CHECK(s != plan.stream_seed(base.with_particle(3)));
  CHECK(s != plan.stream_seed({Role::signal, 2, 2, 3}));
  CHECK(s != plan.stream_seed({Role::signal, 1, 2, 4}));
  CHECK(s != NoisePlan(1).stream_seed(base));
  CHECK(s == NoisePlan(0).stream_seed(base));
}

TEST_CASE("uniform draws lie in [0, 1)") {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
  }
}
