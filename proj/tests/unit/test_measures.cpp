#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "mvfilter/measures.hpp"
#include "mvfilter/stochastics.hpp"

using namespace mvfilter;

namespace {

EmpiricalMeasure cloud1(std::vector<double> xs) { return EmpiricalMeasure(1, std::move(xs)); }

EmpiricalMeasure random_cloud(Rng& rng, std::size_t n, std::size_t dim = 1) {
  std::vector<double> xs(n * dim);
  for (double& x : xs) x = rng.normal() * (1.0 + rng.uniform());
  return EmpiricalMeasure(dim, std::move(xs));
}

}  // namespace

TEST_CASE("second moment") {
  CHECK(second_moment(cloud1({0.0})) == 0.0);
  CHECK(second_moment(cloud1({-1.0, 1.0})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(second_moment(cloud1({0.0, 1.0, 2.0})) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("measure construction validates weights") {
  CHECK_THROWS_AS(EmpiricalMeasure(1, {0.0, 1.0}, {0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(EmpiricalMeasure(1, {0.0, 1.0}, {1.5, -0.5}), std::invalid_argument);
  CHECK_THROWS_AS(EmpiricalMeasure(1, {0.0, 1.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(EmpiricalMeasure(2, {0.0, 1.0, 2.0}), std::invalid_argument);
  const EmpiricalMeasure mu(1, {0.0, 4.0}, {0.25, 0.75});
  CHECK(mu.mean()[0] == doctest::Approx(3.0));
}

TEST_CASE("W2 1-D closed cases") {
  CHECK(wasserstein2_1d(cloud1({0.3, -1.0, 2.0}), cloud1({2.0, 0.3, -1.0})) == 0.0);
  CHECK(wasserstein2_1d(EmpiricalMeasure::dirac(std::vector<double>{1.5}),
                        EmpiricalMeasure::dirac(std::vector<double>{-2.0})) ==
        doctest::Approx(3.5).epsilon(1e-15));
  // exhaustive assignment over the 3! matchings gives sqrt(1/3)
  CHECK(wasserstein2_1d(cloud1({0, 1, 2}), cloud1({0, 1, 3})) ==
        doctest::Approx(0.57735026918962576).epsilon(1e-14));
  CHECK_THROWS_AS(wasserstein2_1d(cloud1({0.0}), EmpiricalMeasure(2, {0.0, 0.0})),
                  std::invalid_argument);
}

TEST_CASE("W2 1-D weighted matches the quantile integral") {
  // mu = 1/2 d0 + 1/2 d1, nu = uniform on {0, 1/3, 2/3, 1}: the quantile
  // functions differ by 1/3 on [1/4, 3/4) ... computed by hand: 1/18.
  const EmpiricalMeasure mu(1, {0.0, 1.0}, {0.5, 0.5});
  const EmpiricalMeasure nu = cloud1({0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0});
  CHECK(wasserstein2_sq_1d(mu, nu) == doctest::Approx(1.0 / 18.0).epsilon(1e-14));
  // unequal uniform sizes route through the sweep; duplicate points agree
  CHECK(wasserstein2_sq_1d(cloud1({0.0, 1.0}), cloud1({0.0, 0.0, 1.0, 1.0})) ==
        doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("assignment solver agrees with the 1-D exact solver") {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const EmpiricalMeasure a = random_cloud(rng, 64), b = random_cloud(rng, 64);
    CHECK(std::abs(wasserstein2_assignment(a, b) - wasserstein2_1d(a, b)) <= 1e-10);
  }
  for (std::size_t n = 1; n <= 64; n *= 2) {
    const EmpiricalMeasure a = random_cloud(rng, n), b = random_cloud(rng, n);
    CHECK(std::abs(wasserstein2_assignment(a, b) - wasserstein2_1d(a, b)) <= 1e-10);
  }
}

TEST_CASE("assignment solver identity and preconditions") {
  const EmpiricalMeasure a(2, {0, 0, 1, 0});
  CHECK(wasserstein2_assignment(a, a) == 0.0);
  CHECK(wasserstein2_assignment(a, EmpiricalMeasure(2, {1, 0, 0, 0})) == 0.0);
  CHECK(wasserstein2_assignment(EmpiricalMeasure(2, {0, 0}), EmpiricalMeasure(2, {3, 4})) ==
        doctest::Approx(5.0));
  CHECK_THROWS_AS(wasserstein2_assignment(a, EmpiricalMeasure(2, {0, 0})), std::invalid_argument);
  CHECK_THROWS_AS(wasserstein2_assignment(cloud1({0, 1}), EmpiricalMeasure(1, {0, 1}, {0.3, 0.7})),
                  std::invalid_argument);
  Rng rng(1);
  CHECK_THROWS_AS(wasserstein2_assignment(random_cloud(rng, 257), random_cloud(rng, 257)),
                  std::invalid_argument);
}

TEST_CASE("W2 metric properties on sampled clouds") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_cloud(rng, 16, 2), b = random_cloud(rng, 16, 2),
               c = random_cloud(rng, 16, 2);
    const double ab = wasserstein2_assignment(a, b), ba = wasserstein2_assignment(b, a);
    CHECK(std::abs(ab - ba) <= 1e-12);
    CHECK(ab <= wasserstein2_assignment(a, c) + wasserstein2_assignment(c, b) + 1e-10);
    const auto x = random_cloud(rng, 40), y = random_cloud(rng, 30), z = random_cloud(rng, 50);
    CHECK(wasserstein2_1d(x, y) <= wasserstein2_1d(x, z) + wasserstein2_1d(z, y) + 1e-10);
  }
}

TEST_CASE("paired upper bound") {
  Rng rng(3);
  std::vector<double> xi(200);
  for (double& x : xi) x = rng.normal();
  auto same = paired_upper_bound_check(xi, xi);
  CHECK(same.w2sq == 0.0);
  CHECK(same.msq == 0.0);

  std::vector<double> shifted = xi;
  for (double& x : shifted) x += 1.0;
  auto tr = paired_upper_bound_check(xi, shifted);
  CHECK(tr.w2sq == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tr.msq == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> perm = xi;
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 17, perm.end());
  auto p = paired_upper_bound_check(xi, perm);
  CHECK(p.w2sq == doctest::Approx(0.0));
  CHECK(p.w2sq <= p.msq + 1e-12);

  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(20), b(20);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal() + 0.5 * a[i];
    }
    const auto r = paired_upper_bound_check(a, b, 2);
    CHECK(r.w2sq <= r.msq + 1e-12);
  }
}

TEST_CASE("gaussian quantile cloud") {
  const auto g = gaussian_quantile_cloud(0.5, 2.0, 4096);
  CHECK(g.size() == 4096);
  CHECK(g.mean()[0] == doctest::Approx(0.5).epsilon(1e-12));
  // the midpoint-quantile rule slightly underestimates the variance
  CHECK(second_moment(g) - 0.25 == doctest::Approx(4.0).epsilon(2e-3));
}

TEST_CASE("measure CSV round trip") {
  const auto path = std::filesystem::temp_directory_path() / "mvfilter_measure_rt.csv";
  const EmpiricalMeasure mu(2, {0.1, -2.0, 1.0 / 3.0, 4.0}, {0.25, 0.75});
  write_measure_csv(path, mu);
  const EmpiricalMeasure back = read_measure_csv(path);
  CHECK(back.dim() == 2);
  CHECK(std::equal(back.points().begin(), back.points().end(), mu.points().begin()));
  CHECK(back.weight(1) == 0.75);
  std::filesystem::remove(path);
}
