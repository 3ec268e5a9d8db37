#include "mvfilter/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mvfilter {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Xoshiro256pp::Xoshiro256pp(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

TimeGrid make_grid(double horizon, double dt) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("time grid: horizon must be positive, got " +
                                std::to_string(horizon));
  }
  if (!(dt > 0.0) || dt > horizon * (1.0 + 1e-12)) {
    throw std::invalid_argument("time grid: need 0 < dt <= T, got dt=" +
                                std::to_string(dt));
  }
  const double ratio = horizon / dt;
  const double n = std::round(ratio);
  if (std::abs(n * dt - horizon) > 1e-9 * horizon) {
    throw std::invalid_argument("time grid: T/dt = " + std::to_string(ratio) +
                                " is not an integer");
  }
  TimeGrid grid;
  grid.horizon = horizon;
  grid.n_steps = static_cast<std::size_t>(n);
  grid.dt = horizon / n;
  return grid;
}

std::size_t grid_index(const TimeGrid& grid, double t) {
  if (t < -1e-12 || t > grid.horizon * (1.0 + 1e-12)) {
    throw std::invalid_argument("time " + std::to_string(t) +
                                " lies outside the grid");
  }
  const double k = std::round(t / grid.dt);
  return static_cast<std::size_t>(std::min(k, static_cast<double>(grid.n_steps)));
}

std::uint64_t NoisePlan::stream_seed(const StreamKey& key) const {
  // Each field is folded through a full splitmix64 round so that nearby keys
  // land on unrelated seeds.
  std::uint64_t state = seed_;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t word : {static_cast<std::uint64_t>(key.role), key.replication,
                             key.particle, key.tag}) {
    state = h ^ word;
    h = splitmix64(state);
  }
  return h;
}

BrownianPath sample_brownian(const TimeGrid& grid, std::size_t dim,
                             const NoisePlan& plan, const StreamKey& key) {
  if (dim == 0) throw std::invalid_argument("brownian path: dim must be >= 1");
  BrownianPath path;
  path.grid = grid;
  path.dim = dim;
  path.values.assign(grid.size() * dim, 0.0);
  Rng rng = plan.stream(key);
  const double sd = std::sqrt(grid.dt);
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    for (std::size_t j = 0; j < dim; ++j) {
      path.values[(k + 1) * dim + j] = path.values[k * dim + j] + sd * rng.normal();
    }
  }
  return path;
}

BrownianPath zero_brownian(const TimeGrid& grid, std::size_t dim) {
  BrownianPath path;
  path.grid = grid;
  path.dim = dim;
  path.values.assign(grid.size() * dim, 0.0);
  return path;
}

}  // namespace mvfilter
