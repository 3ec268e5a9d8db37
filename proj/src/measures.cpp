#include "mvfilter/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "mvfilter/csv.hpp"

namespace mvfilter {

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> points)
    : dim_(dim), points_(std::move(points)) {
  if (dim_ == 0) throw std::invalid_argument("empirical measure: dim must be >= 1");
  if (points_.empty() || points_.size() % dim_ != 0) {
    throw std::invalid_argument("empirical measure: need a nonempty whole number of points");
  }
  const std::size_t n = points_.size() / dim_;
  weights_.assign(n, 1.0 / static_cast<double>(n));
}

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> points,
                                   std::vector<double> weights)
    : EmpiricalMeasure(dim, std::move(points)) {
  if (weights.size() != size()) {
    throw std::invalid_argument("empirical measure: " + std::to_string(weights.size()) +
                                " weights for " + std::to_string(size()) + " points");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("empirical measure: weights must be finite and nonnegative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("empirical measure: weights sum to " + std::to_string(total));
  }
  for (double& w : weights) w /= total;
  weights_ = std::move(weights);
  uniform_ = std::all_of(weights_.begin(), weights_.end(),
                         [&](double w) { return w == weights_.front(); });
}

EmpiricalMeasure EmpiricalMeasure::dirac(std::span<const double> x) {
  return EmpiricalMeasure(x.size(), std::vector<double>(x.begin(), x.end()));
}

std::vector<double> EmpiricalMeasure::mean() const {
  std::vector<double> m(dim_, 0.0);
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < dim_; ++j) m[j] += weights_[i] * points_[i * dim_ + j];
  }
  return m;
}

double second_moment(const EmpiricalMeasure& mu) {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double sq = 0.0;
    for (double c : mu.point(i)) sq += c * c;
    acc += mu.weight(i) * sq;
  }
  return acc;
}

namespace {

std::vector<std::size_t> sorted_order(const EmpiricalMeasure& mu) {
  std::vector<std::size_t> idx(mu.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto pts = mu.points();
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return pts[a] < pts[b]; });
  return idx;
}

}  // namespace

double wasserstein2_sq_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dim() != 1 || nu.dim() != 1) {
    throw std::invalid_argument("wasserstein2_1d: both measures must be one-dimensional (got " +
                                std::to_string(mu.dim()) + " and " +
                                std::to_string(nu.dim()) + ")");
  }
  const auto a = sorted_order(mu);
  const auto b = sorted_order(nu);
  const auto xa = mu.points();
  const auto xb = nu.points();

  if (mu.uniform() && nu.uniform() && mu.size() == nu.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = xa[a[i]] - xb[b[i]];
      acc += d * d;
    }
    return acc / static_cast<double>(a.size());
  }

  // Sweep both quantile functions, transporting the smaller remaining mass.
  std::size_t i = 0, j = 0;
  double ra = mu.weight(a[0]);
  double rb = nu.weight(b[0]);
  double acc = 0.0;
  while (i < a.size() && j < b.size()) {
    const double d = xa[a[i]] - xb[b[j]];
    const double m = std::min(ra, rb);
    acc += m * d * d;
    const bool next_a = ra <= rb;
    const bool next_b = rb <= ra;
    ra -= m;
    rb -= m;
    if (next_a && ++i < a.size()) ra = mu.weight(a[i]);
    if (next_b && ++j < b.size()) rb = nu.weight(b[j]);
  }
  return acc;
}

double wasserstein2_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  return std::sqrt(std::max(0.0, wasserstein2_sq_1d(mu, nu)));
}

namespace {

// Minimum-cost perfect matching on a dense n x n cost matrix (row-major).
// Returns the column assigned to each row.
std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

double wasserstein2_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dim() != nu.dim()) {
    throw std::invalid_argument("wasserstein2_assignment: dimension mismatch");
  }
  if (mu.size() != nu.size()) {
    throw std::invalid_argument("wasserstein2_assignment: clouds must have equal size");
  }
  if (mu.size() > kAssignmentMaxSize) {
    throw std::invalid_argument("wasserstein2_assignment: size " + std::to_string(mu.size()) +
                                " exceeds the cap of " + std::to_string(kAssignmentMaxSize));
  }
  if (!mu.uniform() || !nu.uniform()) {
    throw std::invalid_argument("wasserstein2_assignment: clouds must carry uniform weights");
  }
  const std::size_t n = mu.size();
  const std::size_t dim = mu.dim();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = mu.point(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto y = nu.point(j);
      double sq = 0.0;
      for (std::size_t c = 0; c < dim; ++c) sq += (x[c] - y[c]) * (x[c] - y[c]);
      cost[i * n + j] = sq;
    }
  }
  const auto match = solve_assignment(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + match[i]];
  return std::sqrt(total / static_cast<double>(n));
}

double wasserstein2_sq(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dim() == 1 && nu.dim() == 1) return wasserstein2_sq_1d(mu, nu);
  const double w = wasserstein2_assignment(mu, nu);
  return w * w;
}

PairedBound paired_upper_bound_check(std::span<const double> xi,
                                     std::span<const double> zeta, std::size_t dim) {
  if (xi.size() != zeta.size() || xi.empty() || xi.size() % dim != 0) {
    throw std::invalid_argument("paired_upper_bound_check: samples must be paired");
  }
  const std::size_t n = xi.size() / dim;
  PairedBound out;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const double d = xi[i] - zeta[i];
    out.msq += d * d;
  }
  out.msq /= static_cast<double>(n);
  const EmpiricalMeasure a(dim, std::vector<double>(xi.begin(), xi.end()));
  const EmpiricalMeasure b(dim, std::vector<double>(zeta.begin(), zeta.end()));
  out.w2sq = wasserstein2_sq(a, b);
  return out;
}

EmpiricalMeasure gaussian_quantile_cloud(double mean, double sd, std::size_t n) {
  if (!(sd > 0.0) || n == 0) {
    throw std::invalid_argument("gaussian_quantile_cloud: need sd > 0 and n >= 1");
  }
  const boost::math::normal_distribution<double> law(mean, sd);
  std::vector<double> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = boost::math::quantile(law, (static_cast<double>(i) + 0.5) / static_cast<double>(n));
  }
  return EmpiricalMeasure(1, std::move(pts));
}

void write_measure_csv(const std::filesystem::path& path, const EmpiricalMeasure& mu,
                       bool with_weights) {
  std::vector<std::string> header;
  for (std::size_t j = 0; j < mu.dim(); ++j) header.push_back("x" + std::to_string(j));
  if (with_weights) header.push_back("weight");
  CsvWriter out(path, header);
  std::vector<double> row(header.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto x = mu.point(i);
    std::copy(x.begin(), x.end(), row.begin());
    if (with_weights) row.back() = mu.weight(i);
    out.row(row);
  }
}

EmpiricalMeasure read_measure_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const bool has_weight = !table.header.empty() && table.header.back() == "weight";
  const std::size_t dim = table.header.size() - (has_weight ? 1 : 0);
  if (dim == 0 || table.rows.empty()) {
    throw std::invalid_argument("measure csv " + path.string() + " has no points");
  }
  std::vector<double> pts, w;
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw std::invalid_argument("measure csv " + path.string() + ": ragged row");
    }
    for (std::size_t j = 0; j < dim; ++j) pts.push_back(std::stod(row[j]));
    if (has_weight) w.push_back(std::stod(row.back()));
  }
  if (has_weight) return EmpiricalMeasure(dim, std::move(pts), std::move(w));
  return EmpiricalMeasure(dim, std::move(pts));
}

}  // namespace mvfilter
