#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "stocc/core.hpp"
#include "stocc/error.hpp"

using namespace stocc;

TEST_CASE("encounter array masks and indices") {
  EncounterArray a(2, 3, 4);
  CHECK(a.cells() == 24);
  CHECK(a.surveyed_count() == 0);
  a.set(1, 2, 3, 1);
  a.set(0, 0, 0, 0);
  CHECK(a.surveyed(1, 2, 3));
  CHECK(a.y(1, 2, 3) == 1);
  CHECK(a.any_detection(1, 2));
  CHECK_FALSE(a.any_detection(0, 0));
  CHECK(a.any_survey(0, 0));
  CHECK(a.surveyed_count() == 2);
  CHECK(a.detection_count() == 1);
  a.set_missing(1, 2, 3);
  CHECK_FALSE(a.surveyed(1, 2, 3));
  CHECK(a.y(1, 2, 3) == 0);
  CHECK_THROWS_AS(a.set(0, 0, 0, 2), UsageError);
  CHECK_THROWS_AS(a.set(2, 0, 0, 1), UsageError);
}

TEST_CASE("design matrix product") {
  DesignMatrix m(3, {"(Intercept)", "x"});
  for (std::size_t r = 0; r < 3; ++r) {
    m(r, 0) = 1.0;
    m(r, 1) = static_cast<double>(r);
  }
  std::vector<double> out(3);
  const std::vector<double> coef{0.5, 2.0};
  m.multiply(coef, out);
  CHECK(out == std::vector<double>{0.5, 2.5, 4.5});
  const std::vector<std::size_t> keep{2, 0};
  const DesignMatrix s = m.select_rows(keep);
  CHECK(s.rows() == 2);
  CHECK(s(0, 1) == 2.0);
  CHECK(s(1, 1) == 0.0);
}

TEST_CASE("single site-year probabilities") {
  const std::vector<std::uint8_t> mask{1, 1};
  const std::vector<double> p{0.3, 0.6};
  SUBCASE("detection history") {
    const std::vector<std::uint8_t> y{1, 0};
    CHECK(primary_occasion_probability(y, mask, 0.4, p) ==
          doctest::Approx(0.4 * 0.3 * 0.4).epsilon(1e-14));
  }
  SUBCASE("all zeros mixes the unoccupied branch") {
    const std::vector<std::uint8_t> y{0, 0};
    CHECK(primary_occasion_probability(y, mask, 0.4, p) ==
          doctest::Approx(0.4 * 0.7 * 0.4 + 0.6).epsilon(1e-14));
  }
  SUBCASE("no surveys contributes nothing") {
    const std::vector<std::uint8_t> y{0, 0}, none{0, 0};
    CHECK(log_primary_occasion_probability(y, none, 0.4, p) == 0.0);
  }
  SUBCASE("masked occasion drops its factor") {
    const std::vector<std::uint8_t> y{1, 0}, partial{1, 0};
    CHECK(primary_occasion_probability(y, partial, 0.4, p) == doctest::Approx(0.4 * 0.3));
    const std::vector<std::uint8_t> y0{0, 0};
    CHECK(primary_occasion_probability(y0, partial, 0.4, p) ==
          doctest::Approx(0.4 * 0.7 + 0.6));
  }
  SUBCASE("detection in an unsurveyed slot is rejected") {
    const std::vector<std::uint8_t> y{0, 1}, partial{1, 0};
    CHECK_THROWS_AS(log_primary_occasion_probability(y, partial, 0.4, p), DataError);
  }
}

TEST_CASE("marginal likelihood equals exhaustive enumeration") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    const int I = 1 + rep % 3, T = 1 + (rep / 3) % 2, J = 1 + (rep / 6) % 2;
    const auto in = fixtures::random_instance(I, T, J, rng);
    const double got = marginal_log_likelihood(in.data, in.cov, in.params, in.effects);
    const double want = fixtures::enumeration_log_likelihood(in);
    CHECK(std::abs(got - want) < 1e-10);
  }
}

TEST_CASE("likelihood stays finite at extreme linear predictors") {
  std::mt19937_64 rng(5);
  auto in = fixtures::random_instance(2, 2, 2, rng);
  in.params.beta = {60.0, 0.0};
  in.params.alpha = {-60.0, 0.0};
  CHECK(std::isfinite(marginal_log_likelihood(in.data, in.cov, in.params, in.effects)));
  in.params.beta = {-60.0, 0.0};
  in.params.alpha = {60.0, 0.0};
  CHECK(std::isfinite(marginal_log_likelihood(in.data, in.cov, in.params, in.effects)));
}

TEST_CASE("probabilities are clamped into the open unit interval") {
  CHECK(logistic(1000.0) < 1.0);
  CHECK(logistic(-1000.0) > 0.0);
  std::mt19937_64 rng(9);
  const auto in = fixtures::random_instance(3, 2, 2, rng);
  const LatentStates ls = compute_probabilities(in.data, in.cov, in.params, in.effects);
  for (double v : ls.psi) CHECK((v > 0.0 && v < 1.0));
  for (std::size_t c = 0; c < ls.p.size(); ++c) {
    if (in.data.mask_data()[c]) {
      CHECK((ls.p[c] > 0.0 && ls.p[c] < 1.0));
    } else {
      CHECK(std::isnan(ls.p[c]));
    }
  }
}

TEST_CASE("dimension checks") {
  std::mt19937_64 rng(1);
  auto in = fixtures::random_instance(2, 2, 2, rng);
  in.effects.omega.pop_back();
  CHECK_THROWS_AS(check_dimensions(in.data, in.cov, in.params, in.effects), UsageError);
  ModelParams bad;
  bad.rho = 1.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}
