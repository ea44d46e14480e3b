#pragma once

// Estimator error, bias curves, kernel density surfaces, prior-posterior
// overlap and occupancy / detection summaries.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stocc/core.hpp"
#include "stocc/sampler.hpp"

namespace stocc {

// Small descriptive statistics (sample variance uses n - 1).
double mean(std::span<const double> x);
double variance(std::span<const double> x);
double sd(std::span<const double> x);
/// Linear interpolation between order statistics (R type 7).
double quantile(std::span<const double> x, double prob);
double iqr(std::span<const double> x);

/// 1.06 * min(sd, IQR / 1.349) * n^(-1/5); falls back to sd when IQR is 0.
double normal_reference_bandwidth(std::span<const double> x);

/// Mean of squared elementwise differences. UsageError on shape mismatch.
double mse(std::span<const double> estimates, std::span<const double> truths);

struct BiasBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_estimate = 0.0;  // NaN when empty
  double mean_truth = 0.0;     // NaN when empty
  bool empty = true;
};

/// Equal-width bins of the true psi on [0, 1] (the last bin is closed).
std::vector<BiasBin> bias_curve(std::span<const double> psi_hat, std::span<const double> psi_true,
                                int n_bins = 20);

struct DensityGrid {
  std::vector<double> x_grid;
  std::vector<double> y_grid;
  std::vector<double> density;  // density[ix * y_grid.size() + iy]
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;

  double at(std::size_t ix, std::size_t iy) const { return density[ix * y_grid.size() + iy]; }
  /// Riemann sum over the grid cells.
  double integral() const;
  /// Density thresholds enclosing 10%, 20%, ..., 90% of the grid mass
  /// (highest-density regions), in increasing density order.
  std::vector<double> contour_levels() const;
  /// Decile band (1..10, 10 = densest) of every node; 0 where density is 0.
  std::vector<int> level_bins() const;
};

/// Product-Gaussian KDE on a grid_n x grid_n grid spanning the data range
/// padded by one bandwidth. DataError on zero spread along an axis.
DensityGrid kde2d(std::span<const double> xs, std::span<const double> ys, int grid_n = 128);

struct PriorDensity {
  enum class Kind { uniform, normal, inverse_gamma } kind = Kind::uniform;
  double a = 0.0;  // lower / mean / shape
  double b = 1.0;  // upper / variance / scale

  static PriorDensity uniform(double lower, double upper) { return {Kind::uniform, lower, upper}; }
  static PriorDensity normal(double mean, double var) { return {Kind::normal, mean, var}; }
  static PriorDensity inverse_gamma(double shape, double scale) {
    return {Kind::inverse_gamma, shape, scale};
  }
  double pdf(double x) const;
  std::string describe() const;
};

struct OverlapResult {
  double percent = 0.0;
  /// Draws falling outside the prior support (a data-integrity warning).
  std::size_t outside_support = 0;
};

/// 100 * integral of min(prior, posterior KDE) by trapezoid quadrature on
/// 2048 nodes. Bounded priors integrate over their support; unbounded ones
/// over the draw range padded by five bandwidths.
OverlapResult prior_posterior_overlap(const PriorDensity& prior, std::span<const double> draws);

struct Band {
  std::vector<double> mean, lower, upper;  // central 95% interval
};

struct OccupancySummary {
  Band site;  // E(psi_i), length I
  Band year;  // E(psi_t), length T
};

/// psi_draws rows are draws, each I*T long (site-year order).
OccupancySummary occupancy_summaries(const std::vector<std::vector<double>>& psi_draws, int I,
                                     int T);
OccupancySummary occupancy_summaries(const PosteriorSamples& samples);

/// Per-year fraction of sampled sites with a detection; nullopt when no site
/// was sampled that year.
std::vector<std::optional<double>> naive_occupancy(const EncounterArray& data);

/// Detection probability for each row of `rows` (columns aligned with
/// alpha), averaged over draws with a central 95% interval.
Band detection_curve(const PosteriorSamples& samples, const DesignMatrix& rows);
Band detection_curve(const std::vector<std::vector<double>>& alpha_draws, const DesignMatrix& rows);

}  // namespace stocc
