#pragma once

// Synthetic data for the study scenarios: covariates, random effects, latent
// occupancy, detection and the four sampling designs.

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "stocc/core.hpp"
#include "stocc/rng.hpp"
#include "stocc/spatial.hpp"

namespace stocc {

enum class DesignKind { bernoulli, poisson, phenology, cluster };
enum class OccCovariate { site_year, latitude };      // X_it or L_i
enum class DetCovariate { visit, latitude, visit_latitude };  // v, L or v + L

std::string_view to_string(DesignKind kind);
std::string_view to_string(OccCovariate kind);
std::string_view to_string(DetCovariate kind);

/// Survey mask over cells, indexed like EncounterArray.
using SurveyMask = std::vector<std::uint8_t>;

struct ScenarioSpec {
  std::string id = "1-0";
  int sub_scenario = 0;  // 0..15, see sub_scenario_params
  int I = 1200;
  int T = 10;
  int J = 5;
  ModelParams params;
  DesignKind design = DesignKind::bernoulli;
  std::vector<double> bernoulli_p;  // bernoulli design only, length J
  double lambda = 1.1;              // poisson / phenology / cluster
  double cluster_fraction = 0.25;   // cluster only
  OccCovariate occ = OccCovariate::site_year;
  DetCovariate det = DetCovariate::visit;

  void validate() const;
};

/// The eight study-scenario identifiers in study order.
const std::vector<std::string>& scenario_ids();
bool is_scenario_id(std::string_view id);

/// Low/high grid of (phi, sigma2, rho, sigma2T): bit 0 selects phi, bit 1
/// sigma2, bit 2 rho, bit 3 sigma2T (0 = low, 1 = high). Scenario 1-1 uses
/// phi in {0.5, 1}.
ModelParams sub_scenario_params(std::string_view scenario_id, int sub_scenario, DetCovariate det);

/// Fully populated spec for a scenario id. Dimensions default to the
/// full-scale study (I=1200, T=10) with J = 5 for studies 1-2 and J = 10 for
/// study 3.
ScenarioSpec make_scenario(std::string_view id, int sub_scenario = 0, int I = 1200, int T = 10);

/// Sample-standardised (sd with n-1) first coordinate.
std::vector<double> standardized_latitude(const SiteCoords& coords);

/// Sites sorted by first coordinate, ties by second coordinate then index.
std::vector<int> latitude_order(const SiteCoords& coords);

Covariates generate_covariates(OccCovariate occ, DetCovariate det, int I, int T, int J,
                               const SiteCoords& coords, Rng& rng);

SurveyMask design_bernoulli(int I, int T, int J, std::span<const double> p, Rng& rng);
SurveyMask design_poisson(int I, int T, int J, double lambda, Rng& rng);

/// Peak shape exp(A - ((j - mu) / sigma)^2), j = 1..J, mu = J/2, sigma = J/4.
std::vector<double> phenology_weights(int J, double shift);
/// One noise draw A ~ N(0, 0.33^2).
double draw_phenology_shift(Rng& rng);
std::vector<double> phenology_weights(int J, Rng& rng);

/// Indices of the k largest weights; ties go to the lower index.
std::vector<int> top_k(std::span<const double> weights, int k);

/// Poisson visit counts placed on the highest-weight occasions of each year.
SurveyMask design_phenology(int I, int T, int J, double lambda, Rng& rng);

/// Fixed observation spot of ceil(fraction * I) mid-latitude sites, visited
/// under the phenology design; all other sites are never surveyed.
SurveyMask design_cluster(int I, int T, int J, double lambda, double fraction,
                          const SiteCoords& coords, Rng& rng);

/// Sites retained by design_cluster (sorted ascending).
std::vector<int> cluster_sites(const SiteCoords& coords, double fraction, double shift);

struct Truth {
  ModelParams params;
  std::vector<double> omega;
  std::vector<double> eta;
  std::vector<std::uint8_t> z;  // site-year
  std::vector<double> psi;      // site-year
  std::vector<double> p;        // cell (all cells, surveyed or not)
};

struct SimulatedDataset {
  ScenarioSpec spec;
  std::uint64_t seed = 0;
  SiteCoords coords;
  Covariates cov;
  EncounterArray data;
  Truth truth;
};

/// Deterministic in (spec, seed).
SimulatedDataset simulate_dataset(const ScenarioSpec& spec, std::uint64_t seed);

/// Visit-count profile of a survey design, with the design's expected
/// distribution where it has a closed form (empty for the cluster design).
struct DesignReport {
  std::vector<std::size_t> visit_histogram;  // site-years with 0..J visits
  double zero_visit_fraction = 0.0;
  double two_visit_fraction = 0.0;
  double never_visited_fraction = 0.0;       // sites with no visit in any year
  std::vector<double> expected_histogram;    // per site-year probabilities
  double expected_never_visited = std::numeric_limits<double>::quiet_NaN();
};

DesignReport design_report(const SurveyMask& mask, int I, int T, int J, const ScenarioSpec& spec);
DesignReport design_report(const EncounterArray& data, const ScenarioSpec& spec);

}  // namespace stocc
