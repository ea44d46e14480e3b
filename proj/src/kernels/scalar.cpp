#include "stocc/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace stocc::kernels {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void logistic_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::clamp(x[i], -30.0, 30.0);
    const double p = 1.0 / (1.0 + std::exp(-v));
    out[i] = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
  }
}

void exp_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

double sum_sq_diff_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double gaussian_sum_scalar(double x0, const double* xs, std::size_t n, double inv_h) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (x0 - xs[i]) * inv_h;
    s += std::exp(-0.5 * u * u);
  }
  return s;
}

double gaussian_sum2_scalar(double x0, double y0, const double* xs, const double* ys, std::size_t n,
                            double inv_hx, double inv_hy) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (x0 - xs[i]) * inv_hx;
    const double v = (y0 - ys[i]) * inv_hy;
    s += std::exp(-0.5 * (u * u + v * v));
  }
  return s;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{axpy_scalar,        logistic_scalar,     exp_scalar,
                                 sum_sq_diff_scalar, gaussian_sum_scalar, gaussian_sum2_scalar};
  return table;
}

}  // namespace stocc::kernels
