#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "stocc/convergence.hpp"
#include "stocc/diagnostics.hpp"
#include "stocc/error.hpp"
#include "stocc/sampler.hpp"
#include "stocc/simulator.hpp"

using namespace stocc;

namespace {

struct Functional {
  std::string label;
  double is_mean = 0.0;
  double is_se = 0.0;
};

// Weighted mean and Monte Carlo error of a self-normalised importance sample.
struct WeightedMoments {
  double sw = 0.0, sw2 = 0.0, swf = 0.0, swf2 = 0.0;
  void add(double w, double f) {
    sw += w;
    sw2 += w * w;
    swf += w * f;
    swf2 += w * f * f;
  }
  double mean() const { return swf / sw; }
  double se() const {
    const double m = mean();
    const double var = swf2 / sw - m * m;
    const double ess = sw * sw / sw2;
    return std::sqrt(std::max(var, 0.0) / ess);
  }
};

struct McmcStat {
  double mean = 0.0;
  double se = 0.0;
};

McmcStat mcmc_stat(const ChainSet& chains) {
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  const double m = mean(pooled);
  const double v = variance(pooled);
  if (v == 0.0) return {m, 0.0};
  const double ess = effective_sample_size(chains).value;
  return {m, std::sqrt(v / ess)};
}

ChainSet map_chains(const ChainSet& chains, double (*f)(double)) {
  ChainSet out = chains;
  for (auto& c : out)
    for (auto& v : c) v = f(v);
  return out;
}

SiteCoords three_sites() { return SiteCoords({{0.0, 0.0}, {0.3, 0.1}, {0.7, 0.6}}); }

fixtures::Instance tiny_instance() {
  std::mt19937_64 rng(2024);
  fixtures::Instance in = fixtures::random_instance(3, 2, 2, rng);
  REQUIRE(in.data.detection_count() > 0);
  return in;
}

void compare(const std::string& label, const WeightedMoments& is, const McmcStat& mc) {
  CAPTURE(label);
  CAPTURE(is.mean());
  CAPTURE(mc.mean);
  const double tol = 4.5 * std::sqrt(is.se() * is.se() + mc.se * mc.se) + 0.005;
  CHECK(std::abs(is.mean() - mc.mean) < tol);
}

MCMCConfig small_config(int iter, int burn, int thin, std::uint64_t seed) {
  MCMCConfig c;
  c.n_chains = 2;
  c.n_iter = iter;
  c.n_burn = burn;
  c.thin = thin;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("fixed covariance: posterior matches importance sampling") {
  const fixtures::Instance base = tiny_instance();
  const SiteCoords coords = three_sites();
  const double phi = 2.0, sigma2 = 1.0, rho = 0.5, sigma2T = 0.5;

  // Importance sampling from the prior; weights are the exact likelihood.
  const Eigen::MatrixXd L = covariance_cholesky(coords, {phi, sigma2});
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double sb = std::sqrt(kDefaultCoefVariance);
  WeightedMoments b0, b1, a0, a1, w0, e1, psi0;
  fixtures::Instance in = base;
  for (int k = 0; k < 1000000; ++k) {
    for (auto& b : in.params.beta) b = sb * n01(rng);
    for (auto& a : in.params.alpha) a = sb * n01(rng);
    Eigen::Vector3d g(n01(rng), n01(rng), n01(rng));
    const Eigen::Vector3d w = L * g;
    for (int i = 0; i < 3; ++i) in.effects.omega[i] = w[i];
    in.effects.eta[0] = std::sqrt(sigma2T) * n01(rng);
    in.effects.eta[1] = rho * in.effects.eta[0] + std::sqrt(sigma2T * (1 - rho * rho)) * n01(rng);
    const double wt = std::exp(fixtures::enumeration_log_likelihood(in));
    b0.add(wt, in.params.beta[0]);
    b1.add(wt, in.params.beta[1]);
    a0.add(wt, in.params.alpha[0]);
    a1.add(wt, in.params.alpha[1]);
    w0.add(wt, in.effects.omega[0]);
    e1.add(wt, in.effects.eta[1]);
    psi0.add(wt, fixtures::inv_logit(in.cov.occ(0, 0) * in.params.beta[0] +
                                     in.cov.occ(0, 1) * in.params.beta[1] + in.effects.omega[0] +
                                     in.effects.eta[0]));
  }

  MCMCConfig cfg;
  cfg.n_chains = 4;
  cfg.n_iter = 40000;
  cfg.n_burn = 2000;
  cfg.thin = 2;
  cfg.m_neighbors = 2;  // exact Gaussian process for three sites
  cfg.fix_covariance = true;
  cfg.seed = 99;
  InitialState init;
  init.phi = phi;
  init.sigma2 = sigma2;
  init.rho = rho;
  init.sigma2T = sigma2T;
  cfg.init = init;
  const PriorSpec priors = resolve_priors({}, 2, 2, coords);
  const PosteriorSamples s = fit({base.data, base.cov, coords}, priors, cfg);

  compare("beta0", b0, mcmc_stat(s.chain_values("beta", 0)));
  compare("beta1", b1, mcmc_stat(s.chain_values("beta", 1)));
  compare("alpha0", a0, mcmc_stat(s.chain_values("alpha", 0)));
  compare("alpha1", a1, mcmc_stat(s.chain_values("alpha", 1)));
  compare("omega0", w0, mcmc_stat(s.chain_values("omega", 0)));
  compare("eta1", e1, mcmc_stat(s.chain_values("eta", 1)));
  compare("psi0", psi0, mcmc_stat(s.chain_values("psi", 0)));
  for (double v : s.pooled("phi")) REQUIRE(v == phi);
}

TEST_CASE("full model: posterior matches importance sampling") {
  const fixtures::Instance base = tiny_instance();
  const SiteCoords coords = three_sites();
  PriorSpec priors;
  priors.phi = UniformPrior{0.5, 5.0};
  priors = resolve_priors(priors, 2, 2, coords);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::gamma_distribution<double> gam(2.0, 1.0);
  const double sb = std::sqrt(kDefaultCoefVariance);
  WeightedMoments b0, a0, w0, s2_small, rho_pos, phi_small, s2t_small, psi0;
  fixtures::Instance in = base;
  for (int k = 0; k < 1000000; ++k) {
    for (auto& b : in.params.beta) b = sb * n01(rng);
    for (auto& a : in.params.alpha) a = sb * n01(rng);
    const double phi = 0.5 + 4.5 * u01(rng);
    const double sigma2 = 1.0 / gam(rng);
    const double rho = -1.0 + 2.0 * u01(rng);
    const double sigma2T = 1.0 / gam(rng);
    const Eigen::MatrixXd L = covariance_cholesky(coords, {phi, sigma2});
    const Eigen::Vector3d w = L * Eigen::Vector3d(n01(rng), n01(rng), n01(rng));
    for (int i = 0; i < 3; ++i) in.effects.omega[i] = w[i];
    in.effects.eta[0] = std::sqrt(sigma2T) * n01(rng);
    in.effects.eta[1] = rho * in.effects.eta[0] + std::sqrt(sigma2T * (1 - rho * rho)) * n01(rng);
    const double wt = std::exp(fixtures::enumeration_log_likelihood(in));
    b0.add(wt, in.params.beta[0]);
    a0.add(wt, in.params.alpha[0]);
    w0.add(wt, in.effects.omega[0]);
    s2_small.add(wt, sigma2 < 1.0);
    rho_pos.add(wt, rho > 0.0);
    phi_small.add(wt, phi < 2.75);
    s2t_small.add(wt, sigma2T < 1.0);
    psi0.add(wt, fixtures::inv_logit(in.cov.occ(0, 0) * in.params.beta[0] +
                                     in.cov.occ(0, 1) * in.params.beta[1] + in.effects.omega[0] +
                                     in.effects.eta[0]));
  }

  MCMCConfig cfg;
  cfg.n_chains = 4;
  cfg.n_iter = 60000;
  cfg.n_burn = 5000;
  cfg.thin = 5;
  cfg.m_neighbors = 2;
  cfg.seed = 123;
  const PosteriorSamples s = fit({base.data, base.cov, coords}, priors, cfg);

  compare("beta0", b0, mcmc_stat(s.chain_values("beta", 0)));
  compare("alpha0", a0, mcmc_stat(s.chain_values("alpha", 0)));
  compare("omega0", w0, mcmc_stat(s.chain_values("omega", 0)));
  compare("psi0", psi0, mcmc_stat(s.chain_values("psi", 0)));
  compare("P(sigma2 < 1)", s2_small,
          mcmc_stat(map_chains(s.chain_values("sigma2"), [](double v) { return v < 1.0 ? 1.0 : 0.0; })));
  compare("P(sigma2T < 1)", s2t_small,
          mcmc_stat(map_chains(s.chain_values("sigma2T"), [](double v) { return v < 1.0 ? 1.0 : 0.0; })));
  compare("P(rho > 0)", rho_pos,
          mcmc_stat(map_chains(s.chain_values("rho"), [](double v) { return v > 0.0 ? 1.0 : 0.0; })));
  compare("P(phi < 2.75)", phi_small,
          mcmc_stat(map_chains(s.chain_values("phi"), [](double v) { return v < 2.75 ? 1.0 : 0.0; })));
  for (const auto& c : s.chains) {
    CHECK(c.accept_phi > 0.2);
    CHECK(c.accept_phi < 0.7);
  }
}

TEST_CASE("detections force occupancy in every draw") {
  const SimulatedDataset sim = simulate_dataset(make_scenario("2-0", 3, 60, 4), 31);
  const MCMCConfig cfg = small_config(400, 200, 4, 3);
  const PosteriorSamples s = fit({sim.data, sim.cov, sim.coords}, {}, cfg);
  REQUIRE(s.chains.size() == 2);
  for (const auto& c : s.chains) {
    CHECK(c.draws == 50);
    CHECK(c.beta.size() == 50 * 2);
    CHECK(c.omega.size() == 50 * 60);
    for (std::size_t d = 0; d < c.draws; ++d) {
      for (int i = 0; i < 60; ++i) {
        for (int t = 0; t < 4; ++t) {
          const std::size_t k = static_cast<std::size_t>(i) * 4 + t;
          if (sim.data.any_detection(i, t)) REQUIRE(c.z[d * 240 + k] == 1);
          const double p = c.psi[d * 240 + k];
          REQUIRE((p > 0.0 && p < 1.0));
        }
      }
    }
    for (double v : c.sigma2) CHECK(v > 0.0);
    for (double v : c.rho) CHECK(std::abs(v) < 1.0);
  }
  CHECK(s.total_draws() == 100);
  CHECK(s.pooled("beta", 1).size() == 100);
}

TEST_CASE("fits are reproducible and independent of the thread count") {
  const SimulatedDataset sim = simulate_dataset(make_scenario("1-0", 0, 40, 3), 5);
  MCMCConfig cfg = small_config(200, 100, 2, 17);
  cfg.n_chains = 3;
  const PosteriorSamples a = fit({sim.data, sim.cov, sim.coords}, {}, cfg);
  cfg.threads = 3;
  const PosteriorSamples b = fit({sim.data, sim.cov, sim.coords}, {}, cfg);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(a.chains[c].beta == b.chains[c].beta);
    CHECK(a.chains[c].omega == b.chains[c].omega);
    CHECK(a.chains[c].phi == b.chains[c].phi);
  }
  cfg.seed = 18;
  const PosteriorSamples c = fit({sim.data, sim.cov, sim.coords}, {}, cfg);
  CHECK_FALSE(a.chains[0].beta == c.chains[0].beta);
  CHECK_FALSE(a.chains[0].beta == a.chains[1].beta);
}

TEST_CASE("no detections pull occupancy down") {
  SimulatedDataset sim = simulate_dataset(make_scenario("1-0", 0, 50, 3), 8);
  EncounterArray zeros(50, 3, sim.data.secondaries());
  for (int i = 0; i < 50; ++i)
    for (int t = 0; t < 3; ++t)
      for (int j = 0; j < zeros.secondaries(); ++j)
        if (sim.data.surveyed(i, t, j)) zeros.set(i, t, j, 0);
  const PosteriorSamples s = fit({zeros, sim.cov, sim.coords}, {}, small_config(20000, 1000, 2, 1));
  const auto psi = occupancy_summaries(s);
  CHECK(mean(psi.year.mean) < 0.5);
  // Without detections the detection slope is informed by the prior alone.
  const PriorSpec r = resolve_priors({}, 2, 2, sim.coords);
  const double ppo =
      prior_posterior_overlap(PriorDensity::normal(r.alpha_mean[1], r.alpha_var[1]), s.pooled("alpha", 1)).percent;
  CAPTURE(ppo);
  CHECK(ppo > 80.0);
}

TEST_CASE("non-finite inputs surface as numerical errors") {
  SimulatedDataset sim = simulate_dataset(make_scenario("1-0", 0, 20, 2), 3);
  sim.cov.occ(0, 1) = std::nan("");
  CHECK_THROWS_AS(fit({sim.data, sim.cov, sim.coords}, {}, small_config(20, 10, 1, 1)), NumericalError);
}

TEST_CASE("occupancy is higher where the species was detected") {
  int higher = 0;
  for (int rep = 0; rep < 5; ++rep) {
    const SimulatedDataset sim = simulate_dataset(make_scenario("2-0", 0, 60, 3), 100 + rep);
    const PosteriorSamples s =
        fit({sim.data, sim.cov, sim.coords}, {}, small_config(600, 300, 3, rep + 1));
    double with = 0.0, without = 0.0;
    int nw = 0, nwo = 0;
    for (int i = 0; i < 60; ++i) {
      for (int t = 0; t < 3; ++t) {
        if (!sim.data.any_survey(i, t)) continue;
        const double m = mean(s.pooled("psi", static_cast<std::size_t>(i) * 3 + t));
        if (sim.data.any_detection(i, t)) {
          with += m;
          ++nw;
        } else {
          without += m;
          ++nwo;
        }
      }
    }
    if (nw && nwo && with / nw > without / nwo) ++higher;
  }
  CHECK(higher == 5);
}

TEST_CASE("spatial prediction") {
  const SimulatedDataset sim = simulate_dataset(make_scenario("1-0", 0, 40, 3), 21);
  const PosteriorSamples s = fit({sim.data, sim.cov, sim.coords}, {}, small_config(2200, 200, 2, 4));
  const std::vector<Point> sites{sim.coords[4], {60.0, 60.0}};
  const auto w = predict_omega(s, sim.coords, sites, 5, 77);
  const auto fitted = s.pooled("omega", 4);
  const auto s2 = s.pooled("sigma2");
  REQUIRE(w.size() == fitted.size());
  std::vector<double> far;
  for (std::size_t d = 0; d < w.size(); ++d) {
    CHECK(w[d][0] == fitted[d]);
    far.push_back(w[d][1]);
  }
  CHECK(std::abs(mean(far)) < 4.0 * std::sqrt(mean(s2) / far.size()) + 0.05);
  CHECK(variance(far) == doctest::Approx(mean(s2)).epsilon(0.15));

  DesignMatrix occ(2 * 3, s.beta_names);
  for (std::size_t r = 0; r < occ.rows(); ++r) {
    occ(r, 0) = 1.0;
    occ(r, 1) = 0.3 * static_cast<double>(r);
  }
  const auto psi = predict(s, sim.coords, sites, occ, 5, 78);
  REQUIRE(psi.size() == w.size());
  for (const auto& row : psi) {
    REQUIRE(row.size() == 6);
    for (double v : row) CHECK((v > 0.0 && v < 1.0));
  }
  CHECK_THROWS_AS(predict(s, sim.coords, sites, DesignMatrix(5, s.beta_names), 5, 1), UsageError);
}

TEST_CASE("configuration checks") {
  MCMCConfig c;
  c.n_burn = c.n_iter;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = MCMCConfig{};
  c.thin = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  PriorSpec p;
  p.sigma2.shape = -1.0;
  CHECK_THROWS_AS(p.validate(), UsageError);
  const SiteCoords coords = SiteCoords::lattice(16);
  const PriorSpec r = resolve_priors({}, 2, 3, coords);
  REQUIRE(r.phi.has_value());
  CHECK(r.phi->lower == doctest::Approx(3.0 / std::sqrt(2.0)));
  CHECK(r.phi->upper == doctest::Approx(3.0 / (1.0 / 3.0)));
  CHECK(r.alpha_var == std::vector<double>(3, kDefaultCoefVariance));
}
