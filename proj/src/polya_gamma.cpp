#include "stocc/polya_gamma.hpp"

#include <cmath>
#include <numbers>

#include "stocc/error.hpp"

namespace stocc {

namespace {

constexpr double kTrunc = 0.64;
constexpr double kPi = std::numbers::pi;
constexpr double kPi2Over8 = kPi * kPi / 8.0;

double std_normal_log_cdf(double x) {
  // log Phi(x) via erfc, stable in the lower tail.
  return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
}

// n-th coefficient of the alternating series for the Jacobi density.
double series_coef(int n, double x) {
  const double k = n + 0.5;
  if (x > kTrunc) return kPi * k * std::exp(-k * k * kPi * kPi * x / 2.0);
  return std::pow(2.0 / kPi / x, 1.5) * kPi * k * std::exp(-2.0 * k * k / x);
}

// Probability of proposing from the exponential (right) piece.
double mass_exponential(double z, double fz) {
  const double b = std::sqrt(1.0 / kTrunc) * (kTrunc * z - 1.0);
  const double a = -std::sqrt(1.0 / kTrunc) * (kTrunc * z + 1.0);
  const double x0 = std::log(fz) + fz * kTrunc;
  const double xb = x0 - z + std_normal_log_cdf(b);
  const double xa = x0 + z + std_normal_log_cdf(a);
  const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + qdivp);
}

// Inverse-Gaussian(1/z, 1) truncated to (0, kTrunc).
double truncated_inverse_gaussian(double z, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  double x = kTrunc + 1.0;
  if (1.0 / kTrunc > z) {
    double alpha = 0.0;
    while (uniform01(rng) > alpha) {
      double e1 = 0.0, e2 = 0.0;
      do {
        e1 = expo(rng);
        e2 = expo(rng);
      } while (e1 * e1 > 2.0 * e2 / kTrunc);
      x = 1.0 + e1 * kTrunc;
      x = kTrunc / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    }
  } else {
    const double mu = 1.0 / z;
    while (x > kTrunc) {
      const double n = std_normal(rng);
      const double y = n * n;
      const double half_mu = 0.5 * mu;
      const double mu_y = mu * y;
      x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
      if (uniform01(rng) > mu / (mu + x)) x = mu * mu / x;
    }
  }
  return x;
}

}  // namespace

double sample_polya_gamma(double z, Rng& rng) {
  if (!std::isfinite(z)) throw NumericalError("non-finite Polya-Gamma tilt");
  // PG(1, z) = J*(1, z/2) / 4.
  z = std::abs(z) * 0.5;
  const double fz = kPi2Over8 + 0.5 * z * z;
  const double p_exp = mass_exponential(z, fz);
  std::exponential_distribution<double> expo(1.0);
  for (;;) {
    double x = 0.0;
    if (uniform01(rng) < p_exp) {
      x = kTrunc + expo(rng) / fz;
    } else {
      x = truncated_inverse_gaussian(z, rng);
    }
    double s = series_coef(0, x);
    const double y = uniform01(rng) * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

double polya_gamma_mean(double z) {
  if (std::abs(z) < 1e-6) return 0.25 - z * z / 48.0;
  return std::tanh(z / 2.0) / (2.0 * z);
}

double polya_gamma_variance(double z) {
  if (std::abs(z) < 1e-3) return 1.0 / 24.0 - z * z / 120.0;
  const double c = std::cosh(z / 2.0);
  return (std::sinh(z) - z) / (4.0 * z * z * z * c * c);
}

}  // namespace stocc
