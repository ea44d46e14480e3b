#pragma once

// Data-parallel inner loops used by the sampler and the diagnostics.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The variant is chosen once at startup from CPUID; the environment
// variable STOCC_SIMD=scalar forces the reference path. The two paths are
// equivalence-tested in tests/test_kernels.cpp.

#include <cstddef>
#include <span>
#include <string_view>

namespace stocc::kernels {

enum class Isa { scalar, avx2 };

/// Logistic outputs are clamped to [kProbFloor, 1 - kProbFloor].
inline constexpr double kProbFloor = 1e-12;

struct KernelTable {
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out = clamp(1 / (1 + exp(-x)))
  void (*logistic)(const double* x, double* out, std::size_t n);
  // out = exp(x)
  void (*exp)(const double* x, double* out, std::size_t n);
  // sum (a - b)^2
  double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
  // sum exp(-0.5 * ((x0 - xs) * inv_h)^2)
  double (*gaussian_sum)(double x0, const double* xs, std::size_t n, double inv_h);
  // sum exp(-0.5 * (((x0 - xs) * inv_hx)^2 + ((y0 - ys) * inv_hy)^2))
  double (*gaussian_sum2)(double x0, double y0, const double* xs, const double* ys, std::size_t n,
                          double inv_hx, double inv_hy);
};

const KernelTable& scalar_table();
/// nullptr when the build has no AVX2 variant.
const KernelTable* avx2_table();

bool cpu_supports(Isa isa);
Isa active_isa();
/// Overrides the runtime choice; throws UsageError if the ISA is unavailable.
void set_active_isa(Isa isa);
std::string_view isa_name(Isa isa);

const KernelTable& active();

// Span front-ends over the active table.

void axpy(double a, std::span<const double> x, std::span<double> y);
void logistic(std::span<const double> x, std::span<double> out);
void exp(std::span<const double> x, std::span<double> out);
double sum_sq_diff(std::span<const double> a, std::span<const double> b);
double gaussian_sum(double x0, std::span<const double> xs, double inv_h);
double gaussian_sum2(double x0, double y0, std::span<const double> xs, std::span<const double> ys,
                     double inv_hx, double inv_hy);

}  // namespace stocc::kernels
