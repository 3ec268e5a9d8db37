#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace mvfilter {

/// Weighted point cloud in R^n standing in for a law in P_2(R^n).
///
/// Points are stored row-major (`size()` rows of `dim()` coordinates).
/// Weights are nonnegative and sum to one; a cloud built without weights is
/// uniform.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  EmpiricalMeasure(std::size_t dim, std::vector<double> points);
  EmpiricalMeasure(std::size_t dim, std::vector<double> points,
                   std::vector<double> weights);

  static EmpiricalMeasure dirac(std::span<const double> x);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  bool uniform() const { return uniform_; }

  std::span<const double> point(std::size_t i) const {
    return {points_.data() + i * dim_, dim_};
  }
  double weight(std::size_t i) const { return weights_[i]; }
  std::span<const double> points() const { return points_; }
  std::span<const double> weights() const { return weights_; }

  std::vector<double> mean() const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> points_;
  std::vector<double> weights_;
  bool uniform_ = true;
};

/// mu(|.|^2) = sum_i w_i |x_i|^2.
double second_moment(const EmpiricalMeasure& mu);

/// Exact W2 between two 1-D measures via the monotone (quantile) coupling.
double wasserstein2_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Squared W2 in 1-D; avoids the sqrt round trip inside bound checks.
double wasserstein2_sq_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Maximum cloud size accepted by the assignment solver.
inline constexpr std::size_t kAssignmentMaxSize = 256;

/// Exact W2 for equal-size uniform clouds in any dimension, by solving the
/// optimal assignment problem (Hungarian method, O(N^3)).
double wasserstein2_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Squared W2 through whichever exact route applies: quantile coupling in
/// 1-D, assignment otherwise.
double wasserstein2_sq(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Both sides of W2^2(L_xi, L_zeta) <= E|xi - zeta|^2 evaluated on paired
/// samples (rows of `dim` coordinates).
struct PairedBound {
  double w2sq = 0.0;
  double msq = 0.0;
};
PairedBound paired_upper_bound_check(std::span<const double> xi,
                                     std::span<const double> zeta,
                                     std::size_t dim = 1);

/// N equiprobable quantile points of N(mean, sd^2): Phi^{-1}((i + 1/2)/N).
EmpiricalMeasure gaussian_quantile_cloud(double mean, double sd, std::size_t n = 4096);

/// CSV with one point per row: columns x0..x{n-1}[,weight].
void write_measure_csv(const std::filesystem::path& path, const EmpiricalMeasure& mu,
                       bool with_weights = true);
EmpiricalMeasure read_measure_csv(const std::filesystem::path& path);

}  // namespace mvfilter
