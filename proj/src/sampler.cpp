#include "stocc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "stocc/error.hpp"
#include "stocc/kernels/kernels.hpp"
#include "stocc/polya_gamma.hpp"
#include "stocc/rng.hpp"

namespace stocc {

void PriorSpec::validate() const {
  require(beta_mean.size() == beta_var.size(), "beta prior mean/variance lengths differ");
  require(alpha_mean.size() == alpha_var.size(), "alpha prior mean/variance lengths differ");
  for (double v : beta_var) require(v > 0.0, "beta prior variances must be positive");
  for (double v : alpha_var) require(v > 0.0, "alpha prior variances must be positive");
  require(sigma2.shape > 0.0 && sigma2.scale > 0.0, "sigma2 inverse-gamma prior must be positive");
  require(sigma2T.shape > 0.0 && sigma2T.scale > 0.0,
          "sigma2T inverse-gamma prior must be positive");
  if (phi) require(phi->lower > 0.0 && phi->lower < phi->upper, "phi prior bounds must be ordered");
  require(rho.lower >= -1.0 && rho.lower < rho.upper && rho.upper <= 1.0,
          "rho prior bounds must be ordered within [-1, 1]");
}

PriorSpec resolve_priors(const PriorSpec& priors, std::size_t n_beta, std::size_t n_alpha,
                         const SiteCoords& coords) {
  PriorSpec out = priors;
  if (out.beta_mean.empty()) {
    out.beta_mean.assign(n_beta, 0.0);
    out.beta_var.assign(n_beta, kDefaultCoefVariance);
  }
  if (out.alpha_mean.empty()) {
    out.alpha_mean.assign(n_alpha, 0.0);
    out.alpha_var.assign(n_alpha, kDefaultCoefVariance);
  }
  require(out.beta_mean.size() == n_beta, "beta prior length must match the occupancy design");
  require(out.alpha_mean.size() == n_alpha, "alpha prior length must match the detection design");
  if (!out.phi) {
    if (coords.size() >= 2) {
      out.phi = UniformPrior{3.0 / coords.max_distance(), 3.0 / coords.min_distance()};
    } else {
      out.phi = UniformPrior{3.0, 60.0};
    }
  }
  out.validate();
  return out;
}

void MCMCConfig::validate() const {
  require(n_chains >= 1, "need at least one chain");
  require(n_iter >= 1, "need at least one iteration");
  require(n_burn >= 0 && n_burn < n_iter, "burn-in must be smaller than the iteration count");
  require(thin >= 1, "thinning must be at least 1");
  require(batch_length >= 1, "batch length must be at least 1");
  require(m_neighbors >= 1, "neighbour count must be at least 1");
  require(target_accept > 0.0 && target_accept < 1.0, "target acceptance must lie in (0,1)");
  require(threads >= 1, "thread count must be at least 1");
}

std::size_t PosteriorSamples::total_draws() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.draws;
  return n;
}

std::size_t PosteriorSamples::family_size(std::string_view family) const {
  if (family == "beta") return n_beta();
  if (family == "alpha") return n_alpha();
  if (family == "phi" || family == "sigma2" || family == "rho" || family == "sigma2T") return 1;
  if (family == "omega") return static_cast<std::size_t>(I);
  if (family == "eta") return static_cast<std::size_t>(T);
  if (family == "psi" || family == "z") return static_cast<std::size_t>(I) * T;
  throw UsageError("unknown parameter family '" + std::string(family) + "'");
}

std::vector<std::vector<double>> PosteriorSamples::chain_values(std::string_view family,
                                                                std::size_t index) const {
  const std::size_t width = family_size(family);
  require(index < width, "parameter index out of range");
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    std::vector<double> v(c.draws);
    for (std::size_t d = 0; d < c.draws; ++d) {
      if (family == "beta") v[d] = c.beta[d * width + index];
      else if (family == "alpha") v[d] = c.alpha[d * width + index];
      else if (family == "phi") v[d] = c.phi[d];
      else if (family == "sigma2") v[d] = c.sigma2[d];
      else if (family == "rho") v[d] = c.rho[d];
      else if (family == "sigma2T") v[d] = c.sigma2T[d];
      else if (family == "omega") v[d] = c.omega[d * width + index];
      else if (family == "eta") v[d] = c.eta[d * width + index];
      else if (family == "psi") v[d] = c.psi[d * width + index];
      else v[d] = c.z[d * width + index];
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<double> PosteriorSamples::pooled(std::string_view family, std::size_t index) const {
  std::vector<double> out;
  for (auto& v : chain_values(family, index)) out.insert(out.end(), v.begin(), v.end());
  return out;
}

namespace {

// Data-derived structures shared read-only by all chains.
struct Prepared {
  int I = 0, T = 0, J = 0;
  std::size_t SY = 0;
  const DesignMatrix* occ = nullptr;
  DesignMatrix det;                      // surveyed cells only
  std::vector<std::uint8_t> detected;    // per site-year
  std::vector<std::uint8_t> sampled;     // per site-year
  std::vector<std::size_t> sampled_sy;   // site-years with at least one survey
  std::vector<std::size_t> cell_begin;   // per site-year, into compact cells (size SY + 1)
  std::vector<std::size_t> cell_sy;      // compact cell -> site-year
  std::vector<double> cell_kappa;        // y - 1/2
  std::vector<std::vector<int>> site_sampled_t;  // per site, sampled primaries
};

Prepared prepare(const FitInput& in) {
  const auto& data = in.data;
  Prepared P;
  P.I = data.sites();
  P.T = data.primaries();
  P.J = data.secondaries();
  P.SY = data.site_years();
  require(in.cov.occ.rows() == P.SY, "occupancy design must have I*T rows");
  require(in.cov.det.rows() == data.cells(), "detection design must have I*T*J rows");
  require(in.coords.size() == static_cast<std::size_t>(P.I), "coordinates must match sites");
  require(data.surveyed_count() > 0, "dataset has no surveyed cells");
  P.occ = &in.cov.occ;
  P.detected.assign(P.SY, 0);
  P.sampled.assign(P.SY, 0);
  P.cell_begin.assign(P.SY + 1, 0);
  P.site_sampled_t.assign(P.I, {});
  std::vector<std::size_t> rows;
  for (int i = 0; i < P.I; ++i) {
    for (int t = 0; t < P.T; ++t) {
      const std::size_t s = static_cast<std::size_t>(i) * P.T + t;
      P.cell_begin[s] = rows.size();
      for (int j = 0; j < P.J; ++j) {
        if (!data.surveyed(i, t, j)) continue;
        rows.push_back(data.index(i, t, j));
        P.cell_sy.push_back(s);
        P.cell_kappa.push_back(data.y(i, t, j) - 0.5);
        if (data.y(i, t, j)) P.detected[s] = 1;
      }
      if (rows.size() > P.cell_begin[s]) {
        P.sampled[s] = 1;
        P.sampled_sy.push_back(s);
        P.site_sampled_t[i].push_back(t);
      }
    }
  }
  P.cell_begin[P.SY] = rows.size();
  P.det = in.cov.det.select_rows(rows);
  return P;
}

double draw_inverse_gamma(double shape, double scale, Rng& rng) {
  return 1.0 / std::gamma_distribution<double>(shape, 1.0 / scale)(rng);
}

// Draws from N(P^-1 rhs, P^-1) given a symmetric positive definite P.
Eigen::VectorXd draw_gaussian_canonical(const Eigen::MatrixXd& P, const Eigen::VectorXd& rhs,
                                        Rng& rng, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string("posterior precision for ") + what +
                         " is not positive definite");
  }
  const Eigen::VectorXd mean = llt.solve(rhs);
  Eigen::VectorXd z(P.rows());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = std_normal(rng);
  return mean + llt.matrixU().solve(z);
}

class Chain {
 public:
  Chain(const Prepared& P, const FitInput& in, const NeighborGraph& graph, const PriorSpec& priors,
        const MCMCConfig& cfg, int chain_index)
      : P_(P),
        coords_(in.coords),
        graph_(graph),
        priors_(priors),
        cfg_(cfg),
        rng_(derive_seed(cfg.seed, static_cast<std::uint64_t>(chain_index))) {
    initialise(chain_index);
  }

  ChainDraws run() {
    ChainDraws out;
    const std::size_t keep = static_cast<std::size_t>(cfg_.retained_per_chain());
    const std::size_t nb = P_.occ->cols(), na = P_.det.cols();
    out.beta.reserve(keep * nb);
    out.alpha.reserve(keep * na);
    out.omega.reserve(keep * P_.I);
    out.eta.reserve(keep * P_.T);
    out.z.reserve(keep * P_.SY);
    out.psi.reserve(keep * P_.SY);

    long acc_phi = 0, acc_rho = 0, batch_phi = 0, batch_rho = 0, post_iters = 0;
    int batch_index = 0;
    for (int iter = 0; iter < cfg_.n_iter; ++iter) {
      bool a_phi = false, a_rho = false;
      try {
        update_probabilities();
        update_z();
        update_beta();
        update_alpha();
        update_omega();
        update_eta();
        if (!cfg_.fix_covariance) {
          update_sigma2();
          update_sigma2T();
          a_phi = update_phi();
          a_rho = update_rho();
        }
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at iteration " + std::to_string(iter));
      }
      check_finite(iter);

      batch_phi += a_phi;
      batch_rho += a_rho;
      if ((iter + 1) % cfg_.batch_length == 0) {
        ++batch_index;
        if (iter < cfg_.n_burn && !cfg_.fix_covariance) {
          const double delta = std::min(0.1, 1.0 / std::sqrt(static_cast<double>(batch_index)));
          const double rate_phi = static_cast<double>(batch_phi) / cfg_.batch_length;
          const double rate_rho = static_cast<double>(batch_rho) / cfg_.batch_length;
          log_tune_phi_ += rate_phi > cfg_.target_accept ? delta : -delta;
          log_tune_rho_ += rate_rho > cfg_.target_accept ? delta : -delta;
        }
        batch_phi = batch_rho = 0;
      }
      if (iter >= cfg_.n_burn) {
        ++post_iters;
        acc_phi += a_phi;
        acc_rho += a_rho;
        if ((iter - cfg_.n_burn + 1) % cfg_.thin == 0) store(out);
      }
    }
    out.accept_phi = post_iters ? static_cast<double>(acc_phi) / post_iters : 0.0;
    out.accept_rho = post_iters ? static_cast<double>(acc_rho) / post_iters : 0.0;
    return out;
  }

 private:
  void initialise(int chain_index) {
    const std::size_t nb = P_.occ->cols(), na = P_.det.cols();
    const UniformPrior phi_prior = *priors_.phi;
    beta_.assign(nb, 0.0);
    alpha_.assign(na, 0.0);
    omega_.assign(P_.I, 0.0);
    eta_.assign(P_.T, 0.0);
    phi_ = 0.5 * (phi_prior.lower + phi_prior.upper);
    sigma2_ = 1.0;
    rho_ = 0.5 * (priors_.rho.lower + priors_.rho.upper);
    sigma2T_ = 1.0;
    if (cfg_.init) {
      const InitialState& s = *cfg_.init;
      if (!s.beta.empty()) beta_ = s.beta;
      if (!s.alpha.empty()) alpha_ = s.alpha;
      if (!s.omega.empty()) omega_ = s.omega;
      if (!s.eta.empty()) eta_ = s.eta;
      if (s.phi > 0.0) phi_ = s.phi;
      sigma2_ = s.sigma2;
      rho_ = s.rho;
      sigma2T_ = s.sigma2T;
      require(beta_.size() == nb && alpha_.size() == na &&
                  omega_.size() == static_cast<std::size_t>(P_.I) &&
                  eta_.size() == static_cast<std::size_t>(P_.T),
              "initial state dimensions do not match the data");
    } else if (cfg_.dispersed_inits && chain_index > 0) {
      for (auto& b : beta_) b = std_normal(rng_);
      for (auto& a : alpha_) a = std_normal(rng_);
      const double u = 0.1 + 0.8 * uniform01(rng_);
      phi_ = phi_prior.lower + u * (phi_prior.upper - phi_prior.lower);
      sigma2_ = std::exp(std::log(3.0) * (2.0 * uniform01(rng_) - 1.0));
      sigma2T_ = std::exp(std::log(3.0) * (2.0 * uniform01(rng_) - 1.0));
      rho_ = std::clamp(rho_ + (uniform01(rng_) - 0.5), priors_.rho.lower + 1e-3,
                        priors_.rho.upper - 1e-3);
    }
    require(sigma2_ > 0.0 && sigma2T_ > 0.0 && std::abs(rho_) < 1.0 && phi_ > 0.0,
            "invalid initial covariance parameters");

    z_.assign(P_.SY, 0);
    for (std::size_t s = 0; s < P_.SY; ++s) {
      z_[s] = P_.detected[s] ? 1 : (uniform01(rng_) < 0.5 ? 1 : 0);
    }
    xb_.assign(P_.SY, 0.0);
    lin_.assign(P_.SY, 0.0);
    psi_.assign(P_.SY, 0.0);
    xi_.assign(P_.SY, 0.0);
    kappa_.assign(P_.SY, 0.0);
    va_.assign(P_.det.rows(), 0.0);
    p_.assign(P_.det.rows(), 0.0);
    P_.occ->multiply(beta_, xb_);
    P_.det.multiply(alpha_, va_);
    factors_ = nngp_factors(coords_, graph_, {phi_, 1.0});
  }

  void update_probabilities() {
    for (int i = 0; i < P_.I; ++i) {
      for (int t = 0; t < P_.T; ++t) {
        const std::size_t s = static_cast<std::size_t>(i) * P_.T + t;
        lin_[s] = xb_[s] + omega_[i] + eta_[t];
      }
    }
    kernels::logistic(lin_, psi_);
    kernels::logistic(va_, p_);
  }

  void update_z() {
    for (std::size_t s = 0; s < P_.SY; ++s) {
      if (P_.detected[s]) {
        z_[s] = 1;
        continue;
      }
      double prob = psi_[s];
      if (P_.sampled[s]) {
        double q = 1.0;
        for (std::size_t c = P_.cell_begin[s]; c < P_.cell_begin[s + 1]; ++c) q *= 1.0 - p_[c];
        const double num = psi_[s] * q;
        prob = num / (num + 1.0 - psi_[s]);
      }
      z_[s] = uniform01(rng_) < prob ? 1 : 0;
    }
  }

  void update_beta() {
    const std::size_t nb = beta_.size();
    const DesignMatrix& X = *P_.occ;
    Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::VectorXd rhs(nb);
    for (std::size_t a = 0; a < nb; ++a) {
      prec(a, a) = 1.0 / priors_.beta_var[a];
      rhs[a] = priors_.beta_mean[a] / priors_.beta_var[a];
    }
    for (std::size_t s : P_.sampled_sy) {
      const double w = sample_polya_gamma(lin_[s], rng_);
      xi_[s] = w;
      kappa_[s] = z_[s] - 0.5;
      const double offset = lin_[s] - xb_[s];
      const double r = kappa_[s] - w * offset;
      for (std::size_t a = 0; a < nb; ++a) {
        const double xa = X(s, a);
        rhs[a] += xa * r;
        for (std::size_t b = 0; b <= a; ++b) prec(a, b) += w * xa * X(s, b);
      }
    }
    prec = prec.selfadjointView<Eigen::Lower>();
    const Eigen::VectorXd draw = draw_gaussian_canonical(prec, rhs, rng_, "beta");
    beta_.assign(draw.data(), draw.data() + nb);
    X.multiply(beta_, xb_);
  }

  void update_alpha() {
    const std::size_t na = alpha_.size();
    const DesignMatrix& V = P_.det;
    Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(na, na);
    Eigen::VectorXd rhs(na);
    for (std::size_t a = 0; a < na; ++a) {
      prec(a, a) = 1.0 / priors_.alpha_var[a];
      rhs[a] = priors_.alpha_mean[a] / priors_.alpha_var[a];
    }
    for (std::size_t c = 0; c < V.rows(); ++c) {
      if (!z_[P_.cell_sy[c]]) continue;
      const double w = sample_polya_gamma(va_[c], rng_);
      const double k = P_.cell_kappa[c];
      for (std::size_t a = 0; a < na; ++a) {
        const double va = V(c, a);
        rhs[a] += va * k;
        for (std::size_t b = 0; b <= a; ++b) prec(a, b) += w * va * V(c, b);
      }
    }
    prec = prec.selfadjointView<Eigen::Lower>();
    const Eigen::VectorXd draw = draw_gaussian_canonical(prec, rhs, rng_, "alpha");
    alpha_.assign(draw.data(), draw.data() + na);
    V.multiply(alpha_, va_);
  }

  void update_omega() {
    const auto& nbrs = graph_.neighbors;
    for (int k = 0; k < P_.I; ++k) {
      const int site = graph_.order[k];
      const double Fk = sigma2_ * factors_.f[k];
      double mean_k = 0.0;
      for (std::size_t a = 0; a < nbrs[k].size(); ++a) mean_k += factors_.b[k][a] * omega_[nbrs[k][a]];
      double prec = 1.0 / Fk;
      double num = mean_k / Fk;
      for (const auto& [l, slot] : graph_.children[site]) {
        const double Fl = sigma2_ * factors_.f[l];
        const double bls = factors_.b[l][slot];
        double resid = omega_[graph_.order[l]];
        for (std::size_t a = 0; a < nbrs[l].size(); ++a) {
          if (static_cast<int>(a) != slot) resid -= factors_.b[l][a] * omega_[nbrs[l][a]];
        }
        prec += bls * bls / Fl;
        num += bls * resid / Fl;
      }
      for (int t : P_.site_sampled_t[site]) {
        const std::size_t s = static_cast<std::size_t>(site) * P_.T + t;
        prec += xi_[s];
        num += kappa_[s] - xi_[s] * (xb_[s] + eta_[t]);
      }
      omega_[site] = num / prec + std_normal(rng_) / std::sqrt(prec);
    }
  }

  void update_eta() {
    const int T = P_.T;
    Eigen::MatrixXd prec = ar1_correlation_precision(T, rho_) / sigma2T_;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(T);
    for (std::size_t s : P_.sampled_sy) {
      const int i = static_cast<int>(s / T);
      const int t = static_cast<int>(s % T);
      prec(t, t) += xi_[s];
      rhs[t] += kappa_[s] - xi_[s] * (xb_[s] + omega_[i]);
    }
    const Eigen::VectorXd draw = draw_gaussian_canonical(prec, rhs, rng_, "eta");
    eta_.assign(draw.data(), draw.data() + T);
  }

  void update_sigma2() {
    const double q = nngp_quadratic_form(omega_, graph_, factors_);
    sigma2_ = draw_inverse_gamma(priors_.sigma2.shape + 0.5 * P_.I, priors_.sigma2.scale + 0.5 * q,
                                 rng_);
  }

  void update_sigma2T() {
    const double q = ar1_quadratic_form(eta_, rho_);
    sigma2T_ = draw_inverse_gamma(priors_.sigma2T.shape + 0.5 * P_.T,
                                  priors_.sigma2T.scale + 0.5 * q, rng_);
  }

  double omega_log_density(const NngpFactors& corr_factors) const {
    // Factors are stored on the correlation scale.
    const double qf = nngp_quadratic_form(omega_, graph_, corr_factors);
    double logdet = 0.0;
    for (double f : corr_factors.f) logdet += std::log(sigma2_ * f);
    return -0.5 * (logdet + qf / sigma2_);
  }

  bool update_phi() {
    const UniformPrior bounds = *priors_.phi;
    const double prop = phi_ * std::exp(std::exp(log_tune_phi_) * std_normal(rng_));
    if (!(prop > bounds.lower && prop < bounds.upper)) return false;
    NngpFactors cand;
    try {
      cand = nngp_factors(coords_, graph_, {prop, 1.0});
    } catch (const NumericalError&) {
      return false;
    }
    const double cur = omega_log_density(factors_) + std::log(phi_);
    const double next = omega_log_density(cand) + std::log(prop);
    if (std::log(uniform01(rng_)) < next - cur) {
      phi_ = prop;
      factors_ = std::move(cand);
      return true;
    }
    return false;
  }

  bool update_rho() {
    const UniformPrior bounds = priors_.rho;
    const double prop = std::tanh(std::atanh(rho_) + std::exp(log_tune_rho_) * std_normal(rng_));
    if (!(prop > bounds.lower && prop < bounds.upper) || std::abs(prop) >= 1.0) return false;
    const double cur = ar1_log_density(eta_, {rho_, sigma2T_}) + std::log1p(-rho_ * rho_);
    const double next = ar1_log_density(eta_, {prop, sigma2T_}) + std::log1p(-prop * prop);
    if (std::log(uniform01(rng_)) < next - cur) {
      rho_ = prop;
      return true;
    }
    return false;
  }

  void check_finite(int iter) const {
    double acc = phi_ + sigma2_ + rho_ + sigma2T_;
    for (double v : beta_) acc += v;
    for (double v : alpha_) acc += v;
    for (double v : omega_) acc += v;
    for (double v : eta_) acc += v;
    if (!std::isfinite(acc)) {
      throw NumericalError("non-finite sampler state at iteration " + std::to_string(iter));
    }
  }

  void store(ChainDraws& out) {
    for (int i = 0; i < P_.I; ++i) {
      for (int t = 0; t < P_.T; ++t) {
        const std::size_t s = static_cast<std::size_t>(i) * P_.T + t;
        lin_[s] = xb_[s] + omega_[i] + eta_[t];
      }
    }
    kernels::logistic(lin_, psi_);
    out.beta.insert(out.beta.end(), beta_.begin(), beta_.end());
    out.alpha.insert(out.alpha.end(), alpha_.begin(), alpha_.end());
    out.phi.push_back(phi_);
    out.sigma2.push_back(sigma2_);
    out.rho.push_back(rho_);
    out.sigma2T.push_back(sigma2T_);
    out.omega.insert(out.omega.end(), omega_.begin(), omega_.end());
    out.eta.insert(out.eta.end(), eta_.begin(), eta_.end());
    out.z.insert(out.z.end(), z_.begin(), z_.end());
    out.psi.insert(out.psi.end(), psi_.begin(), psi_.end());
    ++out.draws;
  }

  const Prepared& P_;
  const SiteCoords& coords_;
  const NeighborGraph& graph_;
  const PriorSpec& priors_;
  const MCMCConfig& cfg_;
  Rng rng_;

  std::vector<double> beta_, alpha_, omega_, eta_;
  double phi_ = 1.0, sigma2_ = 1.0, rho_ = 0.0, sigma2T_ = 1.0;
  std::vector<std::uint8_t> z_;
  std::vector<double> xb_, lin_, psi_, xi_, kappa_, va_, p_;
  NngpFactors factors_;
  double log_tune_phi_ = std::log(0.5);
  double log_tune_rho_ = std::log(0.5);
};

}  // namespace

PosteriorSamples fit(const FitInput& input, const PriorSpec& priors, const MCMCConfig& config) {
  config.validate();
  const Prepared P = prepare(input);
  const PriorSpec resolved =
      resolve_priors(priors, input.cov.occ.cols(), input.cov.det.cols(), input.coords);
  const NeighborGraph graph = build_neighbor_graph(input.coords, config.m_neighbors);

  PosteriorSamples out;
  out.I = P.I;
  out.T = P.T;
  out.beta_names = input.cov.occ.names();
  out.alpha_names = input.cov.det.names();
  out.chains.resize(config.n_chains);

  std::vector<std::exception_ptr> errors(config.n_chains);
  auto run_chain = [&](int c) {
    try {
      Chain chain(P, input, graph, resolved, config, c);
      out.chains[c] = chain.run();
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  const int workers = std::min(config.threads, config.n_chains);
  if (workers <= 1) {
    for (int c = 0; c < config.n_chains; ++c) run_chain(c);
  } else {
    for (int first = 0; first < config.n_chains; first += workers) {
      std::vector<std::thread> pool;
      for (int c = first; c < std::min(first + workers, config.n_chains); ++c) {
        pool.emplace_back(run_chain, c);
      }
      for (auto& th : pool) th.join();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<std::vector<double>> predict_omega(const PosteriorSamples& samples,
                                               const SiteCoords& fit_coords,
                                               const std::vector<Point>& new_sites, int m_neighbors,
                                               std::uint64_t seed) {
  require(fit_coords.size() == static_cast<std::size_t>(samples.I),
          "fitted coordinates do not match the posterior samples");
  require(m_neighbors >= 1, "neighbour count must be at least 1");
  Rng rng(seed);
  const std::size_t n_new = new_sites.size();
  const std::size_t total = samples.total_draws();

  struct SiteSetup {
    int coincident = -1;
    std::vector<int> nb;
  };
  std::vector<SiteSetup> setup(n_new);
  for (std::size_t n = 0; n < n_new; ++n) {
    setup[n].nb = nearest_sites(fit_coords, new_sites[n], m_neighbors);
    if (!setup[n].nb.empty() && distance(fit_coords[setup[n].nb[0]], new_sites[n]) == 0.0) {
      setup[n].coincident = setup[n].nb[0];
    }
  }

  std::vector<std::vector<double>> out(total, std::vector<double>(n_new));
  std::size_t row = 0;
  Eigen::MatrixXd C;
  Eigen::VectorXd c;
  for (const auto& chain : samples.chains) {
    for (std::size_t d = 0; d < chain.draws; ++d, ++row) {
      const double* omega = chain.omega.data() + d * samples.I;
      const double phi = chain.phi[d];
      const double sigma2 = chain.sigma2[d];
      for (std::size_t n = 0; n < n_new; ++n) {
        const SiteSetup& st = setup[n];
        if (st.coincident >= 0) {
          out[row][n] = omega[st.coincident];
          continue;
        }
        const auto k = static_cast<Eigen::Index>(st.nb.size());
        C.resize(k, k);
        c.resize(k);
        for (Eigen::Index a = 0; a < k; ++a) {
          C(a, a) = 1.0;
          c[a] = std::exp(-phi * distance(fit_coords[st.nb[a]], new_sites[n]));
          for (Eigen::Index b = 0; b < a; ++b) {
            C(a, b) = C(b, a) = std::exp(-phi * fit_coords.distance(st.nb[a], st.nb[b]));
          }
        }
        Eigen::LLT<Eigen::MatrixXd> llt(C);
        if (llt.info() != Eigen::Success) {
          C.diagonal().array() += 1e-8;
          llt.compute(C);
          if (llt.info() != Eigen::Success) {
            throw NumericalError("singular neighbour covariance during prediction");
          }
        }
        const Eigen::VectorXd b = llt.solve(c);
        double mean = 0.0;
        for (Eigen::Index a = 0; a < k; ++a) mean += b[a] * omega[st.nb[a]];
        const double var = std::max(0.0, sigma2 * (1.0 - c.dot(b)));
        out[row][n] = mean + std::sqrt(var) * std_normal(rng);
      }
    }
  }
  return out;
}

std::vector<std::vector<double>> predict(const PosteriorSamples& samples,
                                         const SiteCoords& fit_coords,
                                         const std::vector<Point>& new_sites,
                                         const DesignMatrix& new_occ, int m_neighbors,
                                         std::uint64_t seed) {
  const std::size_t n_new = new_sites.size();
  const auto T = static_cast<std::size_t>(samples.T);
  require(new_occ.cols() == samples.n_beta(), "new covariate rows must match beta length");
  require(new_occ.rows() == n_new * T, "new covariates must have one row per new site and year");
  const auto omega_new = predict_omega(samples, fit_coords, new_sites, m_neighbors, seed);
  std::vector<std::vector<double>> out;
  out.reserve(omega_new.size());
  std::vector<double> lin(n_new * T), psi(n_new * T);
  std::size_t row = 0;
  for (const auto& chain : samples.chains) {
    for (std::size_t d = 0; d < chain.draws; ++d, ++row) {
      const std::span<const double> beta(chain.beta.data() + d * samples.n_beta(),
                                         samples.n_beta());
      new_occ.multiply(beta, lin);
      for (std::size_t n = 0; n < n_new; ++n) {
        for (std::size_t t = 0; t < T; ++t) lin[n * T + t] += omega_new[row][n] + chain.eta[d * T + t];
      }
      kernels::logistic(lin, psi);
      out.push_back(psi);
    }
  }
  return out;
}

}  // namespace stocc
