#include <atomic>
#include <cstdlib>
#include <cstring>

#include "stocc/error.hpp"
#include "stocc/kernels/kernels.hpp"

namespace stocc::kernels {

#ifndef STOCC_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(STOCC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

namespace {

Isa detect() {
  if (const char* env = std::getenv("STOCC_SIMD"); env && std::strcmp(env, "scalar") == 0) {
    return Isa::scalar;
  }
  return cpu_supports(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!cpu_supports(isa)) throw UsageError("requested SIMD level is not available on this CPU");
  current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

const KernelTable& active() {
  return active_isa() == Isa::avx2 ? *avx2_table() : scalar_table();
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy: length mismatch");
  active().axpy(a, x.data(), y.data(), x.size());
}

void logistic(std::span<const double> x, std::span<double> out) {
  require(x.size() == out.size(), "logistic: length mismatch");
  active().logistic(x.data(), out.data(), x.size());
}

void exp(std::span<const double> x, std::span<double> out) {
  require(x.size() == out.size(), "exp: length mismatch");
  active().exp(x.data(), out.data(), x.size());
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "sum_sq_diff: length mismatch");
  return active().sum_sq_diff(a.data(), b.data(), a.size());
}

double gaussian_sum(double x0, std::span<const double> xs, double inv_h) {
  return active().gaussian_sum(x0, xs.data(), xs.size(), inv_h);
}

double gaussian_sum2(double x0, double y0, std::span<const double> xs, std::span<const double> ys,
                     double inv_hx, double inv_hy) {
  require(xs.size() == ys.size(), "gaussian_sum2: length mismatch");
  return active().gaussian_sum2(x0, y0, xs.data(), ys.data(), xs.size(), inv_hx, inv_hy);
}

}  // namespace stocc::kernels
