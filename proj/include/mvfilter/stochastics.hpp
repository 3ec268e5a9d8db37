#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <boost/random/normal_distribution.hpp>

namespace mvfilter {

/// Uniform grid on [0, T]. `dt` is normalized so that n_steps * dt == T.
struct TimeGrid {
  double horizon = 0.0;
  double dt = 0.0;
  std::size_t n_steps = 0;

  /// Grid time of index k, computed as T*k/n so the last point is exactly T.
  double time(std::size_t k) const {
    return horizon * static_cast<double>(k) / static_cast<double>(n_steps);
  }
  std::size_t size() const { return n_steps + 1; }
};

/// Rejects T/dt that is not an integer to within 1e-9 relative.
TimeGrid make_grid(double horizon, double dt);

/// Index of the grid point closest to time t (t must lie in [0, T]).
std::size_t grid_index(const TimeGrid& grid, double t);

/// xoshiro256++ (Blackman & Vigna). 32 bytes of state, so one generator per
/// particle stays cache friendly.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  Xoshiro256pp() = default;
  explicit Xoshiro256pp(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  friend bool operator==(const Xoshiro256pp&, const Xoshiro256pp&) = default;

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> s_{};
};

/// One independent random stream: uniform bits plus ziggurat normals.
class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  std::uint64_t bits() { return engine_(); }

  void fill_normal(std::span<double> out) {
    for (double& z : out) z = normal();
  }

 private:
  Xoshiro256pp engine_;
  boost::random::normal_distribution<double> normal_;
};

/// Which noise a stream drives.
enum class Role : std::uint64_t {
  signal = 1,       // B: fast-process noise of the data-generating ensemble
  observation = 2,  // W: observation noise
  law = 3,          // independent law ensemble
  filter = 4,       // filter particles
  frozen = 5,       // frozen-equation paths
  invariant = 6,    // long invariant-measure trajectory
  hypothesis = 7,   // hypothesis-check sampling
  bootstrap = 8,    // resampling for standard errors
  reference = 9,    // reference-measure (Brownian) observation paths
  initial = 10,     // initial-condition draws
  resample = 11,    // particle-filter resampling
};

/// Identifies a stream inside a NoisePlan. `tag` separates experiment arms
/// (for instance one value per epsilon grid point).
struct StreamKey {
  Role role = Role::signal;
  std::uint64_t replication = 0;
  std::uint64_t particle = 0;
  std::uint64_t tag = 0;

  StreamKey with_particle(std::uint64_t p) const {
    StreamKey k = *this;
    k.particle = p;
    return k;
  }
  StreamKey with_role(Role r) const {
    StreamKey k = *this;
    k.role = r;
    return k;
  }

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

/// Counter-based stream derivation: the seed of a stream is a hash of
/// (master seed, role, replication, particle, tag), so streams can be built
/// in any order and on any thread.
class NoisePlan {
 public:
  explicit NoisePlan(std::uint64_t master_seed = 0) : seed_(master_seed) {}

  std::uint64_t master_seed() const { return seed_; }
  std::uint64_t stream_seed(const StreamKey& key) const;
  Rng stream(const StreamKey& key) const { return Rng(stream_seed(key)); }

 private:
  std::uint64_t seed_;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Brownian motion sampled on a grid: values[k*dim + j] is coordinate j at
/// grid index k, values at k = 0 are zero.
struct BrownianPath {
  TimeGrid grid;
  std::size_t dim = 1;
  std::vector<double> values;

  std::span<const double> at(std::size_t k) const {
    return {values.data() + k * dim, dim};
  }
  double increment(std::size_t k, std::size_t j = 0) const {
    return values[(k + 1) * dim + j] - values[k * dim + j];
  }
};

BrownianPath sample_brownian(const TimeGrid& grid, std::size_t dim,
                             const NoisePlan& plan, const StreamKey& key);

/// A path identically zero on the grid.
BrownianPath zero_brownian(const TimeGrid& grid, std::size_t dim);

}  // namespace mvfilter
