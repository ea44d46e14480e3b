#pragma once

// MCMC for the spatio-temporal occupancy model: Polya-Gamma Gibbs updates for
// the regression coefficients and random effects, conjugate inverse-gamma
// variances, adaptive random-walk Metropolis for phi and rho.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stocc/core.hpp"
#include "stocc/spatial.hpp"

namespace stocc {

struct InverseGammaPrior {
  double shape = 2.0;
  double scale = 1.0;
};

struct UniformPrior {
  double lower = 0.0;
  double upper = 1.0;
};

struct PriorSpec {
  // Empty vectors expand to N(0, 2.72) for every coefficient.
  std::vector<double> beta_mean, beta_var;
  std::vector<double> alpha_mean, alpha_var;
  InverseGammaPrior sigma2{2.0, 1.0};
  InverseGammaPrior sigma2T{2.0, 1.0};
  // Unset bounds default to U(3 / d_max, 3 / d_min) over the fitted sites.
  std::optional<UniformPrior> phi;
  UniformPrior rho{-1.0, 1.0};

  void validate() const;
};

inline constexpr double kDefaultCoefVariance = 2.72;

/// Fills defaults for the given design widths and site layout.
PriorSpec resolve_priors(const PriorSpec& priors, std::size_t n_beta, std::size_t n_alpha,
                         const SiteCoords& coords);

/// Optional starting state (also used to pin the covariance parameters).
struct InitialState {
  std::vector<double> beta, alpha;
  std::vector<double> omega, eta;
  double phi = 0.0, sigma2 = 1.0, rho = 0.0, sigma2T = 1.0;
};

struct MCMCConfig {
  int n_chains = 3;
  int n_iter = 5000;
  int n_burn = 2500;
  int thin = 5;
  int batch_length = 100;
  int m_neighbors = 5;
  std::uint64_t seed = 1;
  double target_accept = 0.43;
  /// Chains after the first start from dispersed values.
  bool dispersed_inits = true;
  /// Keep (phi, sigma2, rho, sigma2T) at their initial values.
  bool fix_covariance = false;
  std::optional<InitialState> init;
  /// Chains run concurrently on up to this many threads.
  int threads = 1;

  int retained_per_chain() const { return (n_iter - n_burn) / thin; }
  void validate() const;
};

/// Retained draws of one chain, row-major per draw.
struct ChainDraws {
  std::size_t draws = 0;
  std::vector<double> beta;     // draws x n_beta
  std::vector<double> alpha;    // draws x n_alpha
  std::vector<double> phi, sigma2, rho, sigma2T;
  std::vector<double> omega;    // draws x I
  std::vector<double> eta;      // draws x T
  std::vector<std::uint8_t> z;  // draws x (I*T)
  std::vector<double> psi;      // draws x (I*T)
  double accept_phi = 0.0;      // post burn-in acceptance rates
  double accept_rho = 0.0;
};

struct PosteriorSamples {
  int I = 0;
  int T = 0;
  std::vector<std::string> beta_names;
  std::vector<std::string> alpha_names;
  std::vector<ChainDraws> chains;

  std::size_t n_beta() const { return beta_names.size(); }
  std::size_t n_alpha() const { return alpha_names.size(); }
  std::size_t total_draws() const;

  /// Parameter families: beta, alpha, phi, sigma2, rho, sigma2T, omega, eta,
  /// psi, z. `index` addresses vector families (site-year for psi and z).
  std::vector<std::vector<double>> chain_values(std::string_view family,
                                                std::size_t index = 0) const;
  /// All chains concatenated.
  std::vector<double> pooled(std::string_view family, std::size_t index = 0) const;
  std::size_t family_size(std::string_view family) const;
};

struct FitInput {
  const EncounterArray& data;
  const Covariates& cov;
  const SiteCoords& coords;
};

PosteriorSamples fit(const FitInput& input, const PriorSpec& priors, const MCMCConfig& config);

/// Posterior draws of omega at new locations from the NNGP conditional given
/// the m nearest fitted sites; a new site that coincides with a fitted one
/// copies that site's draws. Rows are draws (chains concatenated).
std::vector<std::vector<double>> predict_omega(const PosteriorSamples& samples,
                                               const SiteCoords& fit_coords,
                                               const std::vector<Point>& new_sites, int m_neighbors,
                                               std::uint64_t seed);

/// psi draws for new sites: new_occ has rows indexed site * T + t for the
/// new sites. Returns draws x (n_new * T).
std::vector<std::vector<double>> predict(const PosteriorSamples& samples,
                                         const SiteCoords& fit_coords,
                                         const std::vector<Point>& new_sites,
                                         const DesignMatrix& new_occ, int m_neighbors,
                                         std::uint64_t seed);

}  // namespace stocc
