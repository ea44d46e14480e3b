#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "stocc/kernels/kernels.hpp"

using namespace stocc::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace

TEST_CASE("scalar table matches plain loops") {
  const KernelTable& t = scalar_table();
  std::vector<double> x{-40.0, -1.0, 0.0, 2.0, 40.0}, out(5);
  t.logistic(x.data(), out.data(), x.size());
  CHECK(out[0] == doctest::Approx(kProbFloor));
  CHECK(out[2] == 0.5);
  CHECK(out[3] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
  CHECK(out[4] == doctest::Approx(1.0 - kProbFloor));
  CHECK(t.sum_sq_diff(x.data(), out.data(), 0) == 0.0);
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  const KernelTable* v = avx2_table();
  if (v == nullptr || !cpu_supports(Isa::avx2)) {
    MESSAGE("AVX2 variant not available on this build or CPU; skipping");
    return;
  }
  const KernelTable& s = scalar_table();
  std::mt19937_64 rng(42);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 63u, 64u, 65u, 1000u}) {
    CAPTURE(n);
    const auto x = random_vector(n, -35.0, 35.0, rng);
    const auto y0 = random_vector(n, -3.0, 3.0, rng);

    auto ys = y0, yv = y0;
    s.axpy(0.37, x.data(), ys.data(), n);
    v->axpy(0.37, x.data(), yv.data(), n);
    CHECK(ys == yv);  // bit-identical

    std::vector<double> ls(n), lv(n);
    s.logistic(x.data(), ls.data(), n);
    v->logistic(x.data(), lv.data(), n);
    for (std::size_t k = 0; k < n; ++k) CHECK(rel_err(ls[k], lv[k]) < 1e-13);

    const auto e = random_vector(n, -700.0, 700.0, rng);
    std::vector<double> es(n), ev(n);
    s.exp(e.data(), es.data(), n);
    v->exp(e.data(), ev.data(), n);
    for (std::size_t k = 0; k < n; ++k) CHECK(rel_err(es[k], ev[k]) < 1e-14);

    CHECK(rel_err(s.sum_sq_diff(x.data(), y0.data(), n), v->sum_sq_diff(x.data(), y0.data(), n)) <
          1e-12);
    const double gs = s.gaussian_sum(0.3, y0.data(), n, 1.7);
    const double gv = v->gaussian_sum(0.3, y0.data(), n, 1.7);
    CHECK(std::abs(gs - gv) <= 1e-12 * std::max(1.0, gs));
    const double g2s = s.gaussian_sum2(0.1, -0.2, x.data(), y0.data(), n, 0.05, 0.9);
    const double g2v = v->gaussian_sum2(0.1, -0.2, x.data(), y0.data(), n, 0.05, 0.9);
    CHECK(std::abs(g2s - g2v) <= 1e-12 * std::max(1.0, g2s));
  }
}

TEST_CASE("exp edge cases") {
  const KernelTable* v = avx2_table();
  if (v == nullptr || !cpu_supports(Isa::avx2)) return;
  std::vector<double> x{-800.0, -745.0, -708.5, 0.0, 1e-300, 709.0, 1.0, -1.0}, out(x.size());
  v->exp(x.data(), out.data(), x.size());
  CHECK(out[0] == 0.0);
  CHECK(out[3] == 1.0);
  CHECK(std::isfinite(out[5]));
  CHECK(rel_err(out[6], std::exp(1.0)) < 1e-15);
  CHECK(rel_err(out[7], std::exp(-1.0)) < 1e-15);
}

TEST_CASE("runtime selection can be forced to scalar") {
  const Isa before = active_isa();
  set_active_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  CHECK(&active() == &scalar_table());
  std::vector<double> x{1.0, 2.0}, y{0.0, 0.0};
  axpy(2.0, x, y);
  CHECK(y[1] == 4.0);
  CHECK_THROWS(axpy(1.0, x, std::span<double>(y.data(), 1)));
  set_active_isa(before);
  CHECK(isa_name(Isa::avx2) == "avx2");
}
