#include "stocc/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "stocc/error.hpp"
#include "stocc/kernels/kernels.hpp"

namespace stocc {

EncounterArray::EncounterArray(int sites, int primaries, int secondaries)
    : sites_(sites), primaries_(primaries), secondaries_(secondaries) {
  require(sites > 0 && primaries > 0 && secondaries > 0,
          "EncounterArray dimensions must be strictly positive");
  y_.assign(cells(), 0);
  mask_.assign(cells(), 0);
}

void EncounterArray::check(int i, int t, int j) const {
  require(i >= 0 && i < sites_ && t >= 0 && t < primaries_ && j >= 0 && j < secondaries_,
          "EncounterArray index out of range");
}

void EncounterArray::set(int i, int t, int j, int value) {
  check(i, t, j);
  require(value == 0 || value == 1, "detection value must be 0 or 1");
  const auto k = index(i, t, j);
  y_[k] = static_cast<std::uint8_t>(value);
  mask_[k] = 1;
}

void EncounterArray::set_missing(int i, int t, int j) {
  check(i, t, j);
  const auto k = index(i, t, j);
  y_[k] = 0;
  mask_[k] = 0;
}

std::span<const std::uint8_t> EncounterArray::y_row(int i, int t) const {
  return std::span<const std::uint8_t>(y_).subspan(index(i, t, 0), secondaries_);
}

std::span<const std::uint8_t> EncounterArray::mask_row(int i, int t) const {
  return std::span<const std::uint8_t>(mask_).subspan(index(i, t, 0), secondaries_);
}

bool EncounterArray::any_detection(int i, int t) const {
  const auto row = y_row(i, t);
  return std::any_of(row.begin(), row.end(), [](std::uint8_t v) { return v != 0; });
}

bool EncounterArray::any_survey(int i, int t) const {
  const auto row = mask_row(i, t);
  return std::any_of(row.begin(), row.end(), [](std::uint8_t v) { return v != 0; });
}

std::size_t EncounterArray::surveyed_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

std::size_t EncounterArray::detection_count() const {
  return static_cast<std::size_t>(std::count(y_.begin(), y_.end(), std::uint8_t{1}));
}

DesignMatrix::DesignMatrix(std::size_t rows, std::vector<std::string> names)
    : rows_(rows), names_(std::move(names)), data_(rows_ * names_.size(), 0.0) {}

std::vector<double> DesignMatrix::row(std::size_t r) const {
  std::vector<double> out(cols());
  for (std::size_t c = 0; c < cols(); ++c) out[c] = (*this)(r, c);
  return out;
}

void DesignMatrix::multiply(std::span<const double> coef, std::span<double> out) const {
  require(coef.size() == cols(), "design matrix / coefficient length mismatch");
  require(out.size() == rows_, "design matrix output length mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < cols(); ++c) kernels::axpy(coef[c], column(c), out);
}

DesignMatrix DesignMatrix::select_rows(std::span<const std::size_t> rows) const {
  DesignMatrix out(rows.size(), names_);
  for (std::size_t c = 0; c < cols(); ++c) {
    for (std::size_t k = 0; k < rows.size(); ++k) out(k, c) = (*this)(rows[k], c);
  }
  return out;
}

void ModelParams::validate() const {
  require(!beta.empty(), "beta must contain at least the intercept");
  require(!alpha.empty(), "alpha must contain at least the intercept");
  require(phi > 0.0, "phi must be positive");
  require(sigma2 > 0.0, "sigma2 must be positive");
  require(sigma2T > 0.0, "sigma2T must be positive");
  require(std::abs(rho) < 1.0, "rho must lie in (-1, 1)");
}

double logistic(double x) {
  const double v = std::clamp(x, -30.0, 30.0);
  return std::clamp(1.0 / (1.0 + std::exp(-v)), kernels::kProbFloor, 1.0 - kernels::kProbFloor);
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double clamp_prob(double p) {
  return std::clamp(p, kernels::kProbFloor, 1.0 - kernels::kProbFloor);
}

}  // namespace

double occupancy_probability(std::span<const double> occ_row, std::span<const double> beta,
                             double omega_i, double eta_t) {
  require(occ_row.size() == beta.size(), "occupancy row length must equal beta length");
  const double lp = dot(occ_row, beta) + omega_i + eta_t;
  require(std::isfinite(lp), "occupancy linear predictor is not finite");
  return logistic(lp);
}

double detection_probability(std::span<const double> det_row, std::span<const double> alpha) {
  require(det_row.size() == alpha.size(), "detection row length must equal alpha length");
  const double lp = dot(det_row, alpha);
  require(std::isfinite(lp), "detection linear predictor is not finite");
  return logistic(lp);
}

double log_primary_occasion_probability(std::span<const std::uint8_t> y_row,
                                        std::span<const std::uint8_t> mask_row, double psi,
                                        std::span<const double> p_row) {
  require(y_row.size() == mask_row.size() && y_row.size() == p_row.size(),
          "history, mask and detection rows must have equal length");
  bool detected = false;
  bool surveyed = false;
  double log_detect = 0.0;  // sum over surveyed j of log p^y (1-p)^(1-y)
  for (std::size_t j = 0; j < y_row.size(); ++j) {
    if (!mask_row[j]) {
      if (y_row[j]) throw DataError("detection recorded on an unsurveyed occasion");
      continue;
    }
    surveyed = true;
    const double p = clamp_prob(p_row[j]);
    if (y_row[j]) {
      detected = true;
      log_detect += std::log(p);
    } else {
      log_detect += std::log1p(-p);
    }
  }
  if (!surveyed) return 0.0;
  const double q = clamp_prob(psi);
  if (detected) return std::log(q) + log_detect;
  // log(psi * prod(1 - p) + (1 - psi)) evaluated as a log-sum-exp.
  const double a = std::log(q) + log_detect;
  const double b = std::log1p(-q);
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double primary_occasion_probability(std::span<const std::uint8_t> y_row,
                                    std::span<const std::uint8_t> mask_row, double psi,
                                    std::span<const double> p_row) {
  return std::exp(log_primary_occasion_probability(y_row, mask_row, psi, p_row));
}

void check_dimensions(const EncounterArray& data, const Covariates& cov, const ModelParams& params,
                      const RandomEffects& effects) {
  require(cov.occ.rows() == data.site_years(), "occupancy design must have I*T rows");
  require(cov.det.rows() == data.cells(), "detection design must have I*T*J rows");
  require(cov.occ.cols() == params.beta.size(), "occupancy design columns must match beta");
  require(cov.det.cols() == params.alpha.size(), "detection design columns must match alpha");
  require(effects.omega.size() == static_cast<std::size_t>(data.sites()),
          "omega length must equal the number of sites");
  require(effects.eta.size() == static_cast<std::size_t>(data.primaries()),
          "eta length must equal the number of primary occasions");
}

LatentStates compute_probabilities(const EncounterArray& data, const Covariates& cov,
                                   const ModelParams& params, const RandomEffects& effects) {
  check_dimensions(data, cov, params, effects);
  const int I = data.sites();
  const int T = data.primaries();
  const int J = data.secondaries();
  LatentStates out;
  out.psi.resize(data.site_years());
  out.p.assign(data.cells(), std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < I; ++i) {
    for (int t = 0; t < T; ++t) {
      const std::size_t s = static_cast<std::size_t>(i) * T + t;
      out.psi[s] = occupancy_probability(cov.occ.row(s), params.beta, effects.omega[i],
                                         effects.eta[t]);
      for (int j = 0; j < J; ++j) {
        if (!data.surveyed(i, t, j)) continue;
        const std::size_t c = data.index(i, t, j);
        out.p[c] = detection_probability(cov.det.row(c), params.alpha);
      }
    }
  }
  return out;
}

double marginal_log_likelihood(const EncounterArray& data, const Covariates& cov,
                               const ModelParams& params, const RandomEffects& effects) {
  const LatentStates st = compute_probabilities(data, cov, params, effects);
  const int T = data.primaries();
  const int J = data.secondaries();
  double total = 0.0;
  for (int i = 0; i < data.sites(); ++i) {
    for (int t = 0; t < T; ++t) {
      const std::size_t s = static_cast<std::size_t>(i) * T + t;
      const std::span<const double> p_row(st.p.data() + s * J, J);
      const double v = log_primary_occasion_probability(data.y_row(i, t), data.mask_row(i, t),
                                                        st.psi[s], p_row);
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "non-finite log-likelihood contribution at site " << i << ", primary " << t;
        throw NumericalError(msg.str());
      }
      total += v;
    }
  }
  return total;
}

}  // namespace stocc
