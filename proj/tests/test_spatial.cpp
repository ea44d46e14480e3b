#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "stocc/error.hpp"
#include "stocc/spatial.hpp"

using namespace stocc;

namespace {

SiteCoords random_coords(int n, Rng& rng) {
  std::vector<Point> pts(n);
  for (auto& p : pts) p = {uniform01(rng), uniform01(rng)};
  return SiteCoords(pts);
}

// Dense multivariate normal log density written out directly.
double dense_mvn_log_density(const std::vector<double>& x, const Eigen::MatrixXd& cov) {
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
  const double quad = v.dot(lu.solve(v));
  const double logdet = std::log(lu.determinant());
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

Eigen::MatrixXd dense_exp_cov(const SiteCoords& c, double phi, double sigma2) {
  const auto n = static_cast<Eigen::Index>(c.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      const double d = std::hypot(c[a].lat - c[b].lat, c[a].lon - c[b].lon);
      m(a, b) = sigma2 * std::exp(-phi * d);
    }
  return m;
}

}  // namespace

TEST_CASE("lattice layout") {
  const SiteCoords c = SiteCoords::lattice(200);
  CHECK(c.size() == 200);
  CHECK(c.min_distance() == doctest::Approx(1.0 / 14.0));
  for (const auto& p : c.points()) {
    CHECK(p.lat >= 0.0);
    CHECK(p.lat <= 1.0);
    CHECK(p.lon >= 0.0);
    CHECK(p.lon <= 1.0);
  }
  CHECK_THROWS_AS(SiteCoords({{0, 0}, {0, 0}}), UsageError);
}

TEST_CASE("exponential covariance") {
  CHECK(exp_correlation(0.0, 3.0) == 1.0);
  CHECK(exp_correlation(1.0, 2.0) == doctest::Approx(std::exp(-2.0)));
  CHECK_THROWS_AS(exp_correlation(-1.0, 1.0), UsageError);
  Rng rng(1);
  const SiteCoords c = random_coords(6, rng);
  const Eigen::MatrixXd got = exp_covariance(c, {4.0, 1.5});
  const Eigen::MatrixXd want = dense_exp_cov(c, 4.0, 1.5);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("exact GP density against a dense oracle") {
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const SiteCoords c = random_coords(8, rng);
    const SpatialSpec spec{2.0 + rep, 0.3 + 0.1 * rep};
    const auto omega = sample_spatial_effects(c, spec, rng);
    CHECK(gp_log_density(omega, c, spec) ==
          doctest::Approx(dense_mvn_log_density(omega, dense_exp_cov(c, spec.phi, spec.sigma2)))
              .epsilon(1e-10));
  }
}

TEST_CASE("neighbour graph ordering and lists") {
  const SiteCoords c({{0.5, 0.0}, {0.1, 0.9}, {0.1, 0.2}, {0.9, 0.5}, {0.3, 0.3}});
  const NeighborGraph g = build_neighbor_graph(c, 2);
  // Ordered by first coordinate, ties by second.
  CHECK(g.order == std::vector<int>{2, 1, 4, 0, 3});
  CHECK(g.neighbors[0].empty());
  CHECK(g.neighbors[1] == std::vector<int>{2});
  CHECK(g.neighbors[2] == std::vector<int>{2, 1});
  // Site 0 at (0.5, 0): nearest earlier sites are 4 (0.3,0.3) then 2 (0.1,0.2).
  CHECK(g.neighbors[3] == std::vector<int>{4, 2});
  for (int k = 0; k < 5; ++k) CHECK(g.position[g.order[k]] == k);
  // Children lists mirror neighbour lists.
  std::size_t links = 0;
  for (int s = 0; s < 5; ++s) {
    for (auto [pos, slot] : g.children[s]) {
      CHECK(g.neighbors[pos][slot] == s);
      ++links;
    }
  }
  std::size_t total = 0;
  for (const auto& nb : g.neighbors) total += nb.size();
  CHECK(links == total);
}

TEST_CASE("brute-force neighbour search agrees with the sweep") {
  Rng rng(11);
  const SiteCoords c = random_coords(120, rng);
  const NeighborGraph g = build_neighbor_graph(c, 5);
  for (int k = 0; k < 120; ++k) {
    const int site = g.order[k];
    std::vector<std::pair<double, int>> prev;
    for (int q = 0; q < k; ++q) prev.emplace_back(c.distance(site, g.order[q]), g.order[q]);
    std::sort(prev.begin(), prev.end());
    std::vector<int> want;
    for (std::size_t a = 0; a < std::min<std::size_t>(5, prev.size()); ++a) want.push_back(prev[a].second);
    CHECK(g.neighbors[k] == want);
  }
}

TEST_CASE("NNGP with m = I - 1 reproduces the exact density") {
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + rep * 2;
    const SiteCoords c = random_coords(n, rng);
    const SpatialSpec spec{1.0 + 0.5 * rep, 0.5 + 0.05 * rep};
    const auto omega = sample_spatial_effects(c, spec, rng);
    const NeighborGraph g = build_neighbor_graph(c, n - 1);
    const double got = nngp_log_density(omega, c, spec, g);
    CHECK(std::abs(got - dense_mvn_log_density(omega, dense_exp_cov(c, spec.phi, spec.sigma2))) <
          1e-8);
  }
}

TEST_CASE("NNGP quadratic form and factor scaling") {
  Rng rng(23);
  const SiteCoords c = random_coords(30, rng);
  const NeighborGraph g = build_neighbor_graph(c, 5);
  const auto omega = sample_spatial_effects(c, {3.0, 1.0}, rng);
  const NngpFactors unit = nngp_factors(c, g, {3.0, 1.0});
  const NngpFactors scaled = nngp_factors(c, g, {3.0, 2.5});
  for (std::size_t k = 0; k < unit.f.size(); ++k) {
    CHECK(scaled.f[k] == doctest::Approx(2.5 * unit.f[k]));
  }
  // log density = -0.5 (n log 2 pi + sum log f + Q).
  double logdet = 0.0;
  for (double f : scaled.f) logdet += std::log(f);
  const double q = nngp_quadratic_form(omega, g, scaled);
  CHECK(nngp_log_density(omega, g, scaled) ==
        doctest::Approx(-0.5 * (30 * std::log(2 * std::numbers::pi) + logdet + q)));
}

TEST_CASE("AR(1) covariance, density and precision") {
  CHECK(ar1_covariance(0, {0.9, 1.5}) == doctest::Approx(1.5));
  CHECK(ar1_covariance(2, {0.9, 1.5}) == doctest::Approx(1.5 * 0.81));
  for (double rho : {-0.7, 0.0, 0.5, 0.9}) {
    const int T = 6;
    Eigen::MatrixXd R(T, T);
    for (int a = 0; a < T; ++a)
      for (int b = 0; b < T; ++b) R(a, b) = std::pow(rho, std::abs(a - b));
    const Eigen::MatrixXd Q = ar1_correlation_precision(T, rho);
    CHECK((Q * R - Eigen::MatrixXd::Identity(T, T)).cwiseAbs().maxCoeff() < 1e-12);
    Rng rng(static_cast<std::uint64_t>(100 * (rho + 1)));
    const auto eta = sample_temporal_effects(T, {rho, 0.7}, rng);
    CHECK(ar1_log_density(eta, {rho, 0.7}) ==
          doctest::Approx(dense_mvn_log_density(eta, 0.7 * R)).epsilon(1e-10));
    const Eigen::Map<const Eigen::VectorXd> v(eta.data(), T);
    CHECK(ar1_quadratic_form(eta, rho) == doctest::Approx(v.dot(R.ldlt().solve(v))).epsilon(1e-10));
  }
}

TEST_CASE("generative moments at moderate replication") {
  const SiteCoords c({{0, 0}, {0.1, 0}, {0.3, 0.2}, {0.6, 0.6}, {1, 1}});
  const SpatialSpec spec{3.75, 1.5};
  Rng rng(99);
  const int n = 4000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(5, 5);
  for (int r = 0; r < n; ++r) {
    const auto w = sample_spatial_effects(c, spec, rng);
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b) acc(a, b) += w[a] * w[b];
  }
  acc /= n;
  const Eigen::MatrixXd want = dense_exp_cov(c, spec.phi, spec.sigma2);
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) {
      const double se = std::sqrt((want(a, b) * want(a, b) + want(a, a) * want(b, b)) / n);
      CHECK(std::abs(acc(a, b) - want(a, b)) < 4 * se);
    }
}
