#pragma once

// Occupancy data, parameters and the marginal likelihood of detection /
// non-detection histories with survey gaps.
//
// Index conventions used across the library:
//   site-year  s = i * T + t
//   cell       c = (i * T + t) * J + j
// All indices are zero based in memory; files use one-based primary and
// secondary occasion numbers.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stocc {

/// Detection / non-detection array with an explicit survey mask.
///
/// Unsurveyed cells carry y = 0 internally; `surveyed()` is the source of
/// truth for missingness.
class EncounterArray {
 public:
  EncounterArray() = default;
  /// All cells start unsurveyed.
  EncounterArray(int sites, int primaries, int secondaries);

  int sites() const { return sites_; }
  int primaries() const { return primaries_; }
  int secondaries() const { return secondaries_; }
  std::size_t site_years() const { return static_cast<std::size_t>(sites_) * primaries_; }
  std::size_t cells() const { return site_years() * secondaries_; }

  std::size_t index(int i, int t, int j) const {
    return (static_cast<std::size_t>(i) * primaries_ + t) * secondaries_ + j;
  }

  bool surveyed(int i, int t, int j) const { return mask_[index(i, t, j)] != 0; }
  /// Detection value of a surveyed cell. Unsurveyed cells read as 0.
  int y(int i, int t, int j) const { return y_[index(i, t, j)]; }

  /// Marks the cell surveyed with outcome `value` (0 or 1).
  void set(int i, int t, int j, int value);
  void set_missing(int i, int t, int j);

  std::span<const std::uint8_t> y_data() const { return y_; }
  std::span<const std::uint8_t> mask_data() const { return mask_; }
  /// Row views over the J secondary occasions of one site-year.
  std::span<const std::uint8_t> y_row(int i, int t) const;
  std::span<const std::uint8_t> mask_row(int i, int t) const;

  bool any_detection(int i, int t) const;
  bool any_survey(int i, int t) const;
  std::size_t surveyed_count() const;
  std::size_t detection_count() const;

  bool operator==(const EncounterArray&) const = default;

 private:
  void check(int i, int t, int j) const;

  int sites_ = 0;
  int primaries_ = 0;
  int secondaries_ = 0;
  std::vector<std::uint8_t> y_;
  std::vector<std::uint8_t> mask_;
};

/// Column-major design matrix. Column 0 is conventionally the intercept.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  DesignMatrix(std::size_t rows, std::vector<std::string> names);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }

  std::span<const double> column(std::size_t c) const {
    return {data_.data() + c * rows_, rows_};
  }
  std::span<double> column(std::size_t c) { return {data_.data() + c * rows_, rows_}; }
  std::vector<double> row(std::size_t r) const;

  /// out = X * coef, evaluated with the SIMD kernels.
  void multiply(std::span<const double> coef, std::span<double> out) const;

  /// Keeps only the listed rows, in order.
  DesignMatrix select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const DesignMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::vector<std::string> names_;
  std::vector<double> data_;
};

inline constexpr const char* kInterceptName = "(Intercept)";

/// Occupancy design rows are indexed by site-year, detection rows by cell.
struct Covariates {
  DesignMatrix occ;
  DesignMatrix det;
};

struct ModelParams {
  std::vector<double> beta;   // occupancy coefficients, intercept first
  std::vector<double> alpha;  // detection coefficients, intercept first
  double phi = 1.0;           // spatial decay
  double sigma2 = 1.0;        // spatial variance
  double rho = 0.0;           // temporal correlation
  double sigma2T = 1.0;       // temporal variance

  /// Throws UsageError when a constraint is violated.
  void validate() const;
};

struct RandomEffects {
  std::vector<double> omega;  // per site
  std::vector<double> eta;    // per primary occasion
};

struct LatentStates {
  std::vector<std::uint8_t> z;  // site-year
  std::vector<double> psi;      // site-year
  std::vector<double> p;        // cell; NaN where unsurveyed
};

/// Clamped inverse logit, in [1e-12, 1 - 1e-12].
double logistic(double x);

double occupancy_probability(std::span<const double> occ_row, std::span<const double> beta,
                             double omega_i, double eta_t);

double detection_probability(std::span<const double> det_row, std::span<const double> alpha);

/// Log probability of one site-year history; p_row entries are read only where
/// the mask is set. Throws DataError on a detection in an unsurveyed slot.
double log_primary_occasion_probability(std::span<const std::uint8_t> y_row,
                                        std::span<const std::uint8_t> mask_row, double psi,
                                        std::span<const double> p_row);

double primary_occasion_probability(std::span<const std::uint8_t> y_row,
                                    std::span<const std::uint8_t> mask_row, double psi,
                                    std::span<const double> p_row);

/// Checks shapes of covariates and effects against the data.
void check_dimensions(const EncounterArray& data, const Covariates& cov, const ModelParams& params,
                      const RandomEffects& effects);

/// psi for every site-year and p for every surveyed cell.
LatentStates compute_probabilities(const EncounterArray& data, const Covariates& cov,
                                   const ModelParams& params, const RandomEffects& effects);

/// Sum over site-years of log P(y_it | psi_it, p_it) with z marginalised.
double marginal_log_likelihood(const EncounterArray& data, const Covariates& cov,
                               const ModelParams& params, const RandomEffects& effects);

}  // namespace stocc
