#pragma once

// Exponential-covariance Gaussian processes (exact and nearest-neighbour
// approximated) and the stationary AR(1) process for temporal effects.

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stocc/rng.hpp"

namespace stocc {

/// `lat` is the first coordinate. Neighbour ordering and the latitude
/// covariate both use it.
struct Point {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const Point&) const = default;
};

class SiteCoords {
 public:
  SiteCoords() = default;
  /// Throws UsageError on duplicate or non-finite points.
  explicit SiteCoords(std::vector<Point> points);

  /// Regular lattice of `n` points, ceil(sqrt(n)) columns, filled row by row
  /// and scaled isotropically into the unit square.
  static SiteCoords lattice(int n);

  std::size_t size() const { return points_.size(); }
  const Point& operator[](std::size_t k) const { return points_[k]; }
  const std::vector<Point>& points() const { return points_; }
  double distance(std::size_t a, std::size_t b) const;

  double min_distance() const;
  double max_distance() const;

 private:
  std::vector<Point> points_;
};

double distance(const Point& a, const Point& b);

struct SpatialSpec {
  double phi = 1.0;
  double sigma2 = 1.0;
};

struct TemporalSpec {
  double rho = 0.0;
  double sigma2T = 1.0;
};

double exp_correlation(double d, double phi);

/// sigma2 * exp(-phi * D) with `jitter` added to the diagonal.
Eigen::MatrixXd exp_covariance(const SiteCoords& coords, const SpatialSpec& spec,
                               double jitter = 0.0);

/// Cholesky factor of the exact covariance; on failure retries once with
/// 1e-8 * sigma2 added to the diagonal, then throws NumericalError.
Eigen::MatrixXd covariance_cholesky(const SiteCoords& coords, const SpatialSpec& spec);

/// Exact draw from N(0, Sigma).
std::vector<double> sample_spatial_effects(const SiteCoords& coords, const SpatialSpec& spec,
                                           Rng& rng);

/// Exact multivariate normal log density of omega under the full covariance.
double gp_log_density(std::span<const double> omega, const SiteCoords& coords,
                      const SpatialSpec& spec);

/// Nearest-neighbour DAG. Sites are processed in `order` (by first
/// coordinate, ties by second, then index); the neighbours of the site at
/// position k are the (up to) m closest sites among positions 0..k-1.
struct NeighborGraph {
  int m = 0;
  std::vector<int> order;                   // position -> site
  std::vector<int> position;                // site -> position
  std::vector<std::vector<int>> neighbors;  // position -> neighbour sites

  /// For each site: (position of a later site, slot in that site's list)
  /// for every neighbour list the site appears in.
  std::vector<std::vector<std::pair<int, int>>> children;

  std::string to_json() const;
};

NeighborGraph build_neighbor_graph(const SiteCoords& coords, int m);

/// Indices of the m closest points of `pool` to `target` (ties by index).
std::vector<int> nearest_sites(const SiteCoords& pool, const Point& target, int m);

/// Conditional regression weights b_k and variances f_k of the NNGP
/// factorisation, indexed by ordered position.
struct NngpFactors {
  std::vector<std::vector<double>> b;
  std::vector<double> f;
};

/// `jitter` is added to neighbour-covariance diagonals (scaled by sigma2).
/// A failed factorisation is retried once with 1e-8 * sigma2 extra jitter.
NngpFactors nngp_factors(const SiteCoords& coords, const NeighborGraph& graph,
                         const SpatialSpec& spec, double jitter = 0.0);

/// Sum of log N(omega_k | b_k . omega_N(k), f_k) over ordered sites.
double nngp_log_density(std::span<const double> omega, const SiteCoords& coords,
                        const SpatialSpec& spec, const NeighborGraph& graph, double jitter = 0.0);

/// Same density evaluated from precomputed factors.
double nngp_log_density(std::span<const double> omega, const NeighborGraph& graph,
                        const NngpFactors& factors);

/// sum_k (omega_k - b_k . omega_N(k))^2 / f_k.
double nngp_quadratic_form(std::span<const double> omega, const NeighborGraph& graph,
                           const NngpFactors& factors);

double ar1_covariance(int lag, const TemporalSpec& spec);

/// Stationary AR(1) draw of length T.
std::vector<double> sample_temporal_effects(int T, const TemporalSpec& spec, Rng& rng);

/// Exact log density of eta under the stationary AR(1) model.
double ar1_log_density(std::span<const double> eta, const TemporalSpec& spec);

/// eta' R^-1 eta for the AR(1) correlation matrix R (unit variance).
double ar1_quadratic_form(std::span<const double> eta, double rho);

/// Tridiagonal inverse of the AR(1) correlation matrix.
Eigen::MatrixXd ar1_correlation_precision(int T, double rho);

}  // namespace stocc
