// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after cpu_supports(Isa::avx2) returned true.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "stocc/kernels/kernels.hpp"

namespace stocc::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Cephes-style exp: x = n ln2 + r, |r| <= ln2/2, Pade(2,3) in r^2, scale by 2^n.
// Inputs below -708 flush to zero; inputs are clamped above at 709.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125e-1), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212e-6), r);
  const __m256d rr = _mm256_mul_pd(r, r);

  __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(3.02994407707441961300e-2));
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(9.99999999999999999910e-1));
  p = _mm256_mul_pd(p, r);

  __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.52448340349684104192e-3));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.27265548208155028766e-1));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.00000000000000000009e0));

  const __m256d two_p = _mm256_add_pd(p, p);
  const __m256d e = _mm256_add_pd(_mm256_set1_pd(1.0), _mm256_div_pd(two_p, _mm256_sub_pd(q, p)));

  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 1.5 * 2^52
  const __m256i ni =
      _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), _mm256_castpd_si256(magic));
  const __m256d scale =
      _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52));
  return _mm256_andnot_pd(underflow, _mm256_mul_pd(e, scale));
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  // mul + add rather than fma so results match the scalar path bit for bit.
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void logistic_avx2(const double* x, double* out, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d floor = _mm256_set1_pd(kProbFloor);
  const __m256d ceil = _mm256_set1_pd(1.0 - kProbFloor);
  const __m256d lim = _mm256_set1_pd(30.0);
  const __m256d neg_lim = _mm256_set1_pd(-30.0);
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_min_pd(_mm256_max_pd(_mm256_loadu_pd(x + i), neg_lim), lim);
    const __m256d e = exp_pd(_mm256_xor_pd(v, sign));
    __m256d p = _mm256_div_pd(one, _mm256_add_pd(one, e));
    p = _mm256_min_pd(_mm256_max_pd(p, floor), ceil);
    _mm256_storeu_pd(out + i, p);
  }
  for (; i < n; ++i) {
    const double v = std::clamp(x[i], -30.0, 30.0);
    out[i] = std::clamp(1.0 / (1.0 + std::exp(-v)), kProbFloor, 1.0 - kProbFloor);
  }
}

void exp_avx2(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = std::exp(x[i]);
}

double sum_sq_diff_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double gaussian_sum_avx2(double x0, const double* xs, std::size_t n, double inv_h) {
  const __m256d vx0 = _mm256_set1_pd(x0);
  const __m256d vh = _mm256_set1_pd(inv_h);
  const __m256d mhalf = _mm256_set1_pd(-0.5);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d u = _mm256_mul_pd(_mm256_sub_pd(vx0, _mm256_loadu_pd(xs + i)), vh);
    acc = _mm256_add_pd(acc, exp_pd(_mm256_mul_pd(mhalf, _mm256_mul_pd(u, u))));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double u = (x0 - xs[i]) * inv_h;
    s += std::exp(-0.5 * u * u);
  }
  return s;
}

double gaussian_sum2_avx2(double x0, double y0, const double* xs, const double* ys, std::size_t n,
                          double inv_hx, double inv_hy) {
  const __m256d vx0 = _mm256_set1_pd(x0);
  const __m256d vy0 = _mm256_set1_pd(y0);
  const __m256d vhx = _mm256_set1_pd(inv_hx);
  const __m256d vhy = _mm256_set1_pd(inv_hy);
  const __m256d mhalf = _mm256_set1_pd(-0.5);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d u = _mm256_mul_pd(_mm256_sub_pd(vx0, _mm256_loadu_pd(xs + i)), vhx);
    const __m256d v = _mm256_mul_pd(_mm256_sub_pd(vy0, _mm256_loadu_pd(ys + i)), vhy);
    const __m256d q = _mm256_fmadd_pd(u, u, _mm256_mul_pd(v, v));
    acc = _mm256_add_pd(acc, exp_pd(_mm256_mul_pd(mhalf, q)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double u = (x0 - xs[i]) * inv_hx;
    const double v = (y0 - ys[i]) * inv_hy;
    s += std::exp(-0.5 * (u * u + v * v));
  }
  return s;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{axpy_avx2,        logistic_avx2,     exp_avx2,
                                 sum_sq_diff_avx2, gaussian_sum_avx2, gaussian_sum2_avx2};
  return &table;
}

}  // namespace stocc::kernels
