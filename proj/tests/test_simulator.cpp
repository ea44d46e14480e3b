#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "stocc/error.hpp"
#include "stocc/simulator.hpp"

using namespace stocc;

namespace {

int visits(const SurveyMask& g, std::size_t s, int J) {
  int n = 0;
  for (int j = 0; j < J; ++j) n += g[s * J + j];
  return n;
}

// Newton-Raphson logistic regression; returns (coefficients, standard errors).
std::pair<Eigen::VectorXd, Eigen::VectorXd> logistic_fit(const Eigen::MatrixXd& X,
                                                         const Eigen::VectorXd& y) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(X.cols());
  Eigen::MatrixXd H;
  for (int it = 0; it < 50; ++it) {
    const Eigen::VectorXd p = (1.0 + (-(X * b).array()).exp()).inverse().matrix();
    const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
    H = X.transpose() * w.asDiagonal() * X;
    const Eigen::VectorXd step = H.ldlt().solve(X.transpose() * (y - p));
    b += step;
    if (step.norm() < 1e-12) break;
  }
  const Eigen::VectorXd se = H.inverse().diagonal().cwiseSqrt();
  return {b, se};
}

}  // namespace

TEST_CASE("scenario table") {
  CHECK(scenario_ids().size() == 8);
  CHECK(is_scenario_id("3-2"));
  CHECK_FALSE(is_scenario_id("4-0"));
  const ScenarioSpec s10 = make_scenario("1-0");
  CHECK(s10.design == DesignKind::bernoulli);
  CHECK(s10.J == 5);
  CHECK(s10.bernoulli_p == std::vector<double>{1.0, 0.1, 0.0, 0.0, 0.0});
  CHECK(s10.occ == OccCovariate::site_year);
  CHECK(s10.params.beta == std::vector<double>{0.0, 0.5});
  CHECK(s10.params.alpha == std::vector<double>{0.0, -0.5});
  CHECK(make_scenario("2-0").design == DesignKind::poisson);
  CHECK(make_scenario("2-2").det == DetCovariate::latitude);
  const ScenarioSpec s23 = make_scenario("2-3");
  CHECK(s23.occ == OccCovariate::latitude);
  CHECK(s23.det == DetCovariate::visit_latitude);
  CHECK(s23.params.alpha == std::vector<double>{0.0, -0.5, -0.5});
  CHECK(make_scenario("3-1").design == DesignKind::phenology);
  CHECK(make_scenario("3-1").J == 10);
  const ScenarioSpec s32 = make_scenario("3-2");
  CHECK(s32.design == DesignKind::cluster);
  CHECK(s32.cluster_fraction == 0.25);
  CHECK(s32.J == 10);
}

TEST_CASE("sub-scenario grid") {
  std::set<std::tuple<double, double, double, double>> seen;
  for (int sub = 0; sub < 16; ++sub) {
    const ModelParams p = sub_scenario_params("2-0", sub, DetCovariate::visit);
    CHECK(p.phi == ((sub & 1) ? 15.0 : 3.75));
    CHECK(p.sigma2 == ((sub & 2) ? 1.5 : 0.3));
    CHECK(p.rho == ((sub & 4) ? 0.9 : 0.5));
    CHECK(p.sigma2T == ((sub & 8) ? 1.5 : 0.3));
    seen.insert({p.phi, p.sigma2, p.rho, p.sigma2T});
  }
  CHECK(seen.size() == 16);
  CHECK(sub_scenario_params("1-1", 0, DetCovariate::visit).phi == 0.5);
  CHECK(sub_scenario_params("1-1", 1, DetCovariate::visit).phi == 1.0);
  CHECK_THROWS_AS(sub_scenario_params("1-0", 16, DetCovariate::visit), UsageError);
}

TEST_CASE("Poisson design") {
  Rng rng(1);
  const int I = 100000, J = 5;
  const SurveyMask g = design_poisson(I, 1, J, 1.1, rng);
  std::vector<int> hist(J + 1, 0);
  for (int s = 0; s < I; ++s) ++hist[visits(g, s, J)];
  CHECK(static_cast<double>(hist[0]) / I == doctest::Approx(std::exp(-1.1)).epsilon(0.015));
  // Counts above J are clipped; the top bin holds P(N >= J).
  double tail = 1.0, pk = std::exp(-1.1);
  for (int k = 0; k < J; ++k) {
    tail -= pk;
    pk *= 1.1 / (k + 1);
  }
  CHECK(static_cast<double>(hist[J]) / I == doctest::Approx(tail).epsilon(0.2));
}

TEST_CASE("Bernoulli design") {
  Rng rng(2);
  const int I = 100000, J = 5;
  const std::vector<double> p{1.0, 0.1, 0.0, 0.0, 0.0};
  const SurveyMask g = design_bernoulli(I, 1, J, p, rng);
  int two = 0;
  for (int s = 0; s < I; ++s) {
    CHECK(g[static_cast<std::size_t>(s) * J] == 1);
    two += visits(g, s, J) == 2;
  }
  CHECK(static_cast<double>(two) / I == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("phenology weights and top-k") {
  const auto w = phenology_weights(10, 0.0);
  CHECK(std::max_element(w.begin(), w.end()) - w.begin() == 4);  // j = 5 = J/2
  CHECK(w[4] == doctest::Approx(1.0));
  CHECK(w[0] == doctest::Approx(std::exp(-((1 - 5.0) / 2.5) * ((1 - 5.0) / 2.5))));
  const std::vector<double> ties{1.0, 3.0, 3.0, 2.0};
  CHECK(top_k(ties, 2) == std::vector<int>{1, 2});
  CHECK(top_k(ties, 1) == std::vector<int>{1});
  CHECK(top_k(ties, 9).size() == 4);
  // A full visit count covers every occasion regardless of weights.
  CHECK(top_k(w, 10).size() == 10);
}

TEST_CASE("phenology design concentrates visits mid-season") {
  Rng rng(3);
  const int I = 5000, T = 2, J = 10;
  const SurveyMask g = design_phenology(I, T, J, 1.1, rng);
  std::vector<int> per_j(J, 0);
  for (std::size_t c = 0; c < g.size(); ++c) per_j[c % J] += g[c];
  CHECK(per_j[4] > per_j[0]);
  CHECK(per_j[4] >= per_j[5]);
  CHECK(per_j[0] <= per_j[9] + 50);
}

TEST_CASE("cluster design keeps a fixed mid-latitude spot") {
  const int I = 200, T = 5, J = 10;
  const SiteCoords coords = SiteCoords::lattice(I);
  Rng rng(4);
  const SurveyMask g = design_cluster(I, T, J, 1.1, 0.25, coords, rng);
  const auto spot = cluster_sites(coords, 0.25, 0.0);
  CHECK(spot.size() == 50);
  std::set<int> in_spot(spot.begin(), spot.end());
  for (int i = 0; i < I; ++i) {
    for (int t = 0; t < T; ++t) {
      const int v = visits(g, static_cast<std::size_t>(i) * T + t, J);
      if (!in_spot.count(i)) CHECK(v == 0);
    }
  }
  // The spot sits in the middle of the latitude order.
  const auto order = latitude_order(coords);
  std::vector<int> pos;
  for (int s : spot) pos.push_back(static_cast<int>(std::find(order.begin(), order.end(), s) - order.begin()));
  std::sort(pos.begin(), pos.end());
  CHECK(pos.front() >= 70);
  CHECK(pos.back() <= 130);
}

TEST_CASE("covariates") {
  const SiteCoords coords = SiteCoords::lattice(100);
  const auto L = standardized_latitude(coords);
  double m = 0.0, ss = 0.0;
  for (double v : L) m += v;
  m /= L.size();
  for (double v : L) ss += (v - m) * (v - m);
  CHECK(std::abs(m) < 1e-12);
  CHECK(ss / (L.size() - 1) == doctest::Approx(1.0));
  Rng rng(5);
  const Covariates cov =
      generate_covariates(OccCovariate::latitude, DetCovariate::visit_latitude, 100, 3, 4, coords, rng);
  CHECK(cov.occ.names() == std::vector<std::string>{"(Intercept)", "L"});
  CHECK(cov.det.names() == std::vector<std::string>{"(Intercept)", "v", "L"});
  CHECK(cov.occ.rows() == 300);
  CHECK(cov.det.rows() == 1200);
  CHECK(cov.occ(7 * 3 + 2, 1) == L[7]);
  CHECK(cov.det((7 * 3 + 2) * 4 + 1, 2) == L[7]);
}

TEST_CASE("simulated data obey the model's hard constraints") {
  for (const auto& id : scenario_ids()) {
    CAPTURE(id);
    const ScenarioSpec spec = make_scenario(id, 5, 80, 4);
    const SimulatedDataset ds = simulate_dataset(spec, 12);
    for (int i = 0; i < spec.I; ++i) {
      for (int t = 0; t < spec.T; ++t) {
        const std::size_t s = static_cast<std::size_t>(i) * spec.T + t;
        if (!ds.truth.z[s]) CHECK_FALSE(ds.data.any_detection(i, t));
        CHECK((ds.truth.psi[s] > 0.0 && ds.truth.psi[s] < 1.0));
      }
    }
    for (double p : ds.truth.p) CHECK((p > 0.0 && p < 1.0));
  }
}

TEST_CASE("simulation is deterministic in the seed") {
  const ScenarioSpec spec = make_scenario("3-2", 3, 60, 3);
  const auto a = simulate_dataset(spec, 77);
  const auto b = simulate_dataset(spec, 77);
  const auto c = simulate_dataset(spec, 78);
  CHECK(a.data == b.data);
  CHECK(a.truth.omega == b.truth.omega);
  CHECK(a.cov.det == b.cov.det);
  CHECK_FALSE(a.truth.omega == c.truth.omega);
}

TEST_CASE("vanishing random effects recover a covariate-only logistic model") {
  ScenarioSpec spec = make_scenario("1-0", 0, 1200, 10);
  spec.params.sigma2 = 1e-10;
  spec.params.sigma2T = 1e-10;
  const SimulatedDataset ds = simulate_dataset(spec, 2718);
  const auto n = static_cast<Eigen::Index>(ds.truth.z.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    X(r, 0) = 1.0;
    X(r, 1) = ds.cov.occ(static_cast<std::size_t>(r), 1);
    y[r] = ds.truth.z[static_cast<std::size_t>(r)];
  }
  const auto [b, se] = logistic_fit(X, y);
  CHECK(std::abs(b[0] - 0.0) < 3.5 * se[0]);
  CHECK(std::abs(b[1] - 0.5) < 3.5 * se[1]);
}

TEST_CASE("design report") {
  ScenarioSpec spec = make_scenario("2-0", 0, 2000, 10);
  const SimulatedDataset ds = simulate_dataset(spec, 6);
  const DesignReport r = design_report(ds.data, spec);
  CHECK(r.visit_histogram.size() == 6);
  CHECK(std::accumulate(r.visit_histogram.begin(), r.visit_histogram.end(), std::size_t{0}) == 20000);
  CHECK(r.expected_histogram[0] == doctest::Approx(std::exp(-1.1)));
  CHECK(r.expected_never_visited == doctest::Approx(std::exp(-11.0)));
  CHECK(r.zero_visit_fraction == doctest::Approx(std::exp(-1.1)).epsilon(0.05));

  const ScenarioSpec b = make_scenario("1-0", 0, 500, 2);
  const DesignReport rb = design_report(simulate_dataset(b, 1).data, b);
  CHECK(rb.expected_histogram[1] == doctest::Approx(0.9));
  CHECK(rb.expected_histogram[2] == doctest::Approx(0.1));
  CHECK(rb.zero_visit_fraction == 0.0);
}
