#include "stocc/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <json.hpp>
#include <queue>

#include "stocc/error.hpp"

namespace stocc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kJitterRetry = 1e-8;

}  // namespace

double distance(const Point& a, const Point& b) { return std::hypot(a.lat - b.lat, a.lon - b.lon); }

SiteCoords::SiteCoords(std::vector<Point> points) : points_(std::move(points)) {
  for (const auto& p : points_) {
    require(std::isfinite(p.lat) && std::isfinite(p.lon), "site coordinates must be finite");
  }
  std::vector<Point> sorted = points_;
  std::sort(sorted.begin(), sorted.end(), [](const Point& a, const Point& b) {
    return a.lat < b.lat || (a.lat == b.lat && a.lon < b.lon);
  });
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
          "site coordinates must be distinct");
}

SiteCoords SiteCoords::lattice(int n) {
  require(n >= 1, "lattice needs at least one site");
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int rows = (n + cols - 1) / cols;
  const double span = std::max(1, std::max(rows, cols) - 1);
  std::vector<Point> pts;
  pts.reserve(n);
  for (int s = 0; s < n; ++s) {
    const int r = s / cols;
    const int c = s % cols;
    pts.push_back({r / span, c / span});
  }
  return SiteCoords(std::move(pts));
}

double SiteCoords::distance(std::size_t a, std::size_t b) const {
  return stocc::distance(points_[a], points_[b]);
}

double SiteCoords::min_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < size(); ++a) {
    for (std::size_t b = a + 1; b < size(); ++b) best = std::min(best, distance(a, b));
  }
  return best;
}

double SiteCoords::max_distance() const {
  double best = 0.0;
  for (std::size_t a = 0; a < size(); ++a) {
    for (std::size_t b = a + 1; b < size(); ++b) best = std::max(best, distance(a, b));
  }
  return best;
}

double exp_correlation(double d, double phi) {
  require(d >= 0.0, "distance must be non-negative");
  require(phi > 0.0, "phi must be positive");
  return std::exp(-phi * d);
}

Eigen::MatrixXd exp_covariance(const SiteCoords& coords, const SpatialSpec& spec, double jitter) {
  const auto n = static_cast<Eigen::Index>(coords.size());
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    cov(a, a) = spec.sigma2 + jitter;
    for (Eigen::Index b = 0; b < a; ++b) {
      const double v = spec.sigma2 * std::exp(-spec.phi * coords.distance(a, b));
      cov(a, b) = v;
      cov(b, a) = v;
    }
  }
  return cov;
}

Eigen::MatrixXd covariance_cholesky(const SiteCoords& coords, const SpatialSpec& spec) {
  require(spec.phi > 0.0 && spec.sigma2 > 0.0, "spatial parameters must be positive");
  Eigen::LLT<Eigen::MatrixXd> llt(exp_covariance(coords, spec));
  if (llt.info() != Eigen::Success) {
    llt.compute(exp_covariance(coords, spec, kJitterRetry * spec.sigma2));
    if (llt.info() != Eigen::Success) {
      throw NumericalError("spatial covariance is not positive definite after jitter");
    }
  }
  return llt.matrixL();
}

std::vector<double> sample_spatial_effects(const SiteCoords& coords, const SpatialSpec& spec,
                                           Rng& rng) {
  require(coords.size() >= 1, "need at least one site");
  const Eigen::MatrixXd L = covariance_cholesky(coords, spec);
  Eigen::VectorXd z(L.rows());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = std_normal(rng);
  const Eigen::VectorXd w = L.triangularView<Eigen::Lower>() * z;
  return {w.data(), w.data() + w.size()};
}

double gp_log_density(std::span<const double> omega, const SiteCoords& coords,
                      const SpatialSpec& spec) {
  require(omega.size() == coords.size(), "omega length must equal the number of sites");
  const Eigen::MatrixXd L = covariance_cholesky(coords, spec);
  const Eigen::Map<const Eigen::VectorXd> w(omega.data(), static_cast<Eigen::Index>(omega.size()));
  const Eigen::VectorXd u = L.triangularView<Eigen::Lower>().solve(w);
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(omega.size()) * kLog2Pi + logdet + u.squaredNorm());
}

NeighborGraph build_neighbor_graph(const SiteCoords& coords, int m) {
  require(m >= 1, "neighbour count must be at least 1");
  const int n = static_cast<int>(coords.size());
  NeighborGraph g;
  g.m = m;
  g.order.resize(n);
  for (int k = 0; k < n; ++k) g.order[k] = k;
  std::sort(g.order.begin(), g.order.end(), [&](int a, int b) {
    const Point& pa = coords[a];
    const Point& pb = coords[b];
    if (pa.lat != pb.lat) return pa.lat < pb.lat;
    if (pa.lon != pb.lon) return pa.lon < pb.lon;
    return a < b;
  });
  g.position.resize(n);
  for (int k = 0; k < n; ++k) g.position[g.order[k]] = k;
  g.neighbors.assign(n, {});
  g.children.assign(n, {});

  using Cand = std::pair<double, int>;  // squared distance, site
  for (int k = 1; k < n; ++k) {
    const Point& pk = coords[g.order[k]];
    std::priority_queue<Cand> best;  // max-heap on (d2, site)
    for (int q = k - 1; q >= 0; --q) {
      const int site = g.order[q];
      const Point& pq = coords[site];
      const double dlat = pk.lat - pq.lat;
      if (static_cast<int>(best.size()) == m && dlat * dlat > best.top().first) break;
      const double dlon = pk.lon - pq.lon;
      const Cand c{dlat * dlat + dlon * dlon, site};
      if (static_cast<int>(best.size()) < m) {
        best.push(c);
      } else if (c < best.top()) {
        best.pop();
        best.push(c);
      }
    }
    std::vector<Cand> found;
    while (!best.empty()) {
      found.push_back(best.top());
      best.pop();
    }
    std::sort(found.begin(), found.end());
    for (const auto& c : found) g.neighbors[k].push_back(c.second);
  }
  for (int k = 0; k < n; ++k) {
    for (int slot = 0; slot < static_cast<int>(g.neighbors[k].size()); ++slot) {
      g.children[g.neighbors[k][slot]].push_back({k, slot});
    }
  }
  return g;
}

std::string NeighborGraph::to_json() const {
  nlohmann::json j;
  j["m"] = m;
  j["ordering"] = order;
  j["neighbors"] = neighbors;
  return j.dump();
}

std::vector<int> nearest_sites(const SiteCoords& pool, const Point& target, int m) {
  std::vector<std::pair<double, int>> d;
  d.reserve(pool.size());
  for (std::size_t k = 0; k < pool.size(); ++k) {
    d.push_back({distance(pool[k], target), static_cast<int>(k)});
  }
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(std::max(m, 0)), d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(keep), d.end());
  std::vector<int> out;
  for (std::size_t k = 0; k < keep; ++k) out.push_back(d[k].second);
  return out;
}

namespace {

// Returns false when the neighbour system is not numerically positive definite.
bool solve_conditional(const SiteCoords& coords, int site, const std::vector<int>& nb, double phi,
                       double jitter, Eigen::MatrixXd& C, Eigen::VectorXd& c,
                       std::vector<double>& b_out, double& f_corr) {
  const auto n = static_cast<Eigen::Index>(nb.size());
  if (n == 0) {
    b_out.clear();
    f_corr = 1.0 + jitter;
    return true;
  }
  C.resize(n, n);
  c.resize(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    C(a, a) = 1.0 + jitter;
    c[a] = std::exp(-phi * coords.distance(site, nb[a]));
    for (Eigen::Index q = 0; q < a; ++q) {
      const double v = std::exp(-phi * coords.distance(nb[a], nb[q]));
      C(a, q) = v;
      C(q, a) = v;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd b = llt.solve(c);
  f_corr = 1.0 + jitter - c.dot(b);
  if (!(f_corr > 0.0)) return false;
  b_out.assign(b.data(), b.data() + n);
  return true;
}

}  // namespace

NngpFactors nngp_factors(const SiteCoords& coords, const NeighborGraph& graph,
                         const SpatialSpec& spec, double jitter) {
  require(graph.order.size() == coords.size(), "neighbour graph does not match coordinates");
  require(spec.phi > 0.0 && spec.sigma2 > 0.0, "spatial parameters must be positive");
  const std::size_t n = coords.size();
  NngpFactors out;
  out.b.resize(n);
  out.f.resize(n);
  Eigen::MatrixXd C;
  Eigen::VectorXd c;
  for (std::size_t k = 0; k < n; ++k) {
    const int site = graph.order[k];
    double f_corr = 0.0;
    if (!solve_conditional(coords, site, graph.neighbors[k], spec.phi, jitter, C, c, out.b[k],
                           f_corr) &&
        !solve_conditional(coords, site, graph.neighbors[k], spec.phi, jitter + kJitterRetry, C,
                           c, out.b[k], f_corr)) {
      throw NumericalError("singular neighbour covariance at site " + std::to_string(site));
    }
    out.f[k] = spec.sigma2 * f_corr;
  }
  return out;
}

namespace {

double conditional_residual(std::span<const double> omega, const NeighborGraph& graph,
                            const NngpFactors& factors, std::size_t k) {
  const auto& nb = graph.neighbors[k];
  double mean = 0.0;
  for (std::size_t a = 0; a < nb.size(); ++a) mean += factors.b[k][a] * omega[nb[a]];
  return omega[graph.order[k]] - mean;
}

}  // namespace

double nngp_log_density(std::span<const double> omega, const NeighborGraph& graph,
                        const NngpFactors& factors) {
  require(omega.size() == graph.order.size(), "omega length must equal the number of sites");
  double total = 0.0;
  for (std::size_t k = 0; k < omega.size(); ++k) {
    const double r = conditional_residual(omega, graph, factors, k);
    total += -0.5 * (kLog2Pi + std::log(factors.f[k]) + r * r / factors.f[k]);
  }
  return total;
}

double nngp_log_density(std::span<const double> omega, const SiteCoords& coords,
                        const SpatialSpec& spec, const NeighborGraph& graph, double jitter) {
  return nngp_log_density(omega, graph, nngp_factors(coords, graph, spec, jitter));
}

double nngp_quadratic_form(std::span<const double> omega, const NeighborGraph& graph,
                           const NngpFactors& factors) {
  double total = 0.0;
  for (std::size_t k = 0; k < omega.size(); ++k) {
    const double r = conditional_residual(omega, graph, factors, k);
    total += r * r / factors.f[k];
  }
  return total;
}

double ar1_covariance(int lag, const TemporalSpec& spec) {
  require(lag >= 0, "lag must be non-negative");
  return spec.sigma2T * std::pow(spec.rho, lag);
}

std::vector<double> sample_temporal_effects(int T, const TemporalSpec& spec, Rng& rng) {
  require(T >= 1, "need at least one primary occasion");
  require(std::abs(spec.rho) < 1.0 && spec.sigma2T > 0.0, "invalid temporal parameters");
  std::vector<double> eta(T);
  eta[0] = std::sqrt(spec.sigma2T) * std_normal(rng);
  const double innov_sd = std::sqrt(spec.sigma2T * (1.0 - spec.rho * spec.rho));
  for (int t = 1; t < T; ++t) eta[t] = spec.rho * eta[t - 1] + innov_sd * std_normal(rng);
  return eta;
}

double ar1_quadratic_form(std::span<const double> eta, double rho) {
  if (eta.empty()) return 0.0;
  double q = eta[0] * eta[0];
  const double denom = 1.0 - rho * rho;
  for (std::size_t t = 1; t < eta.size(); ++t) {
    const double r = eta[t] - rho * eta[t - 1];
    q += r * r / denom;
  }
  return q;
}

double ar1_log_density(std::span<const double> eta, const TemporalSpec& spec) {
  require(std::abs(spec.rho) < 1.0 && spec.sigma2T > 0.0, "invalid temporal parameters");
  const auto T = static_cast<double>(eta.size());
  const double logdet = T * std::log(spec.sigma2T) + (T - 1.0) * std::log1p(-spec.rho * spec.rho);
  return -0.5 * (T * kLog2Pi + logdet + ar1_quadratic_form(eta, spec.rho) / spec.sigma2T);
}

Eigen::MatrixXd ar1_correlation_precision(int T, double rho) {
  require(T >= 1, "need at least one primary occasion");
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(T, T);
  if (T == 1) {
    Q(0, 0) = 1.0;
    return Q;
  }
  const double s = 1.0 / (1.0 - rho * rho);
  for (int t = 0; t < T; ++t) {
    Q(t, t) = (t == 0 || t == T - 1) ? s : s * (1.0 + rho * rho);
    if (t + 1 < T) {
      Q(t, t + 1) = -rho * s;
      Q(t + 1, t) = -rho * s;
    }
  }
  return Q;
}

}  // namespace stocc
