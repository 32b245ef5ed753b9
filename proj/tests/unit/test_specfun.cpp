#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "linprobit/errors.hpp"
#include "linprobit/specfun.hpp"
#include "oracles.hpp"

using namespace linprobit;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("normal density and distribution reference values") {
  CHECK(norm_pdf(1.0) == doctest::Approx(0.24197072451914337).epsilon(1e-15));
  CHECK(norm_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-15));
  CHECK(log_norm_pdf(3.0) == doctest::Approx(std::log(norm_pdf(3.0))).epsilon(1e-14));
  CHECK(norm_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-15));
  CHECK(norm_cdf(0.0) == 0.5);
  CHECK(norm_cdf(kInf) == 1.0);
  CHECK(norm_cdf(-kInf) == 0.0);
}

TEST_CASE("log_norm_cdf stays finite deep in the lower tail") {
  CHECK(log_norm_cdf(-40.0) == doctest::Approx(-804.6084420137538).epsilon(1e-13));
  CHECK(log_norm_cdf(5.0) == doctest::Approx(-2.866516129637636e-7).epsilon(1e-12));
  CHECK(std::isfinite(log_norm_cdf(-1e4)));
  CHECK(log_norm_cdf(-1e4) == doctest::Approx(-0.5e8 - std::log(1e4) - 0.5 * std::log(2.0 * std::numbers::pi))
                                  .epsilon(1e-14));
  // Continuity across the switch to the asymptotic series.
  CHECK(log_norm_cdf(-30.0 - 1e-9) == doctest::Approx(log_norm_cdf(-30.0)).epsilon(1e-9));
  for (double x : {-29.0, -10.0, -3.0, -0.5, 0.7, 4.0})
    CHECK(log_norm_cdf(x) == doctest::Approx(std::log(oracle::Phi(x))).epsilon(1e-13));
}

TEST_CASE("inverse Mills ratio") {
  CHECK(inv_mills(0.0) == doctest::Approx(2.0 * norm_pdf(0.0)).epsilon(1e-15));
  for (double x : {-50.0, -200.0}) {
    // phi(x)/Phi(x) = -x + 1/(-x) - 2/(-x)^3 + ...
    const double t = -x;
    CHECK(inv_mills(x) == doctest::Approx(t + 1.0 / t - 2.0 / (t * t * t)).epsilon(1e-9));
  }
  CHECK(inv_mills(10.0) == doctest::Approx(norm_pdf(10.0)).epsilon(1e-12));
}

TEST_CASE("quantile function") {
  CHECK(norm_cdf_inv(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-14));
  CHECK(norm_cdf_inv(0.5) == 0.0);
  CHECK_THROWS_AS(norm_cdf_inv(0.0), DomainError);
  CHECK_THROWS_AS(norm_cdf_inv(1.0), DomainError);
  CHECK_THROWS_AS(norm_cdf_inv(std::nan("")), DomainError);
  for (double p : {1e-300, 1e-20, 0.01, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-12})
    CHECK(norm_cdf(norm_cdf_inv(p)) == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("log-space quantile") {
  for (double p : {1e-200, 1e-5, 0.2, 0.9})
    CHECK(norm_cdf_inv_log(std::log(p)) == doctest::Approx(norm_cdf_inv(p)).epsilon(1e-12));
  for (double lp : {-1000.0, -1e5}) {
    const double x = norm_cdf_inv_log(lp);
    CHECK(log_norm_cdf(x) == doctest::Approx(lp).epsilon(1e-12));
  }
  CHECK_THROWS_AS(norm_cdf_inv_log(0.0), DomainError);
}

TEST_CASE("Correlation rejects values outside (-1, 1)") {
  CHECK_THROWS_AS(Correlation(1.0), DomainError);
  CHECK_THROWS_AS(Correlation(-1.0), DomainError);
  CHECK_THROWS_AS(Correlation(1.5), DomainError);
  CHECK_THROWS_AS(Correlation(std::nan("")), DomainError);
  CHECK(Correlation(0.999999).value() == 0.999999);
}

TEST_CASE("bivariate normal CDF reference values") {
  CHECK(binorm_cdf(1.0, -1.0, Correlation(0.3)) == doctest::Approx(0.14833820905742245).epsilon(1e-13));
  CHECK(binorm_cdf(0.5, -0.2, Correlation(0.95)) == doctest::Approx(0.42014795525515244).epsilon(1e-13));
  CHECK(binorm_cdf(-1.2, 0.7, Correlation(-0.97)) == doctest::Approx(0.00047303988954501050).epsilon(1e-11));
  CHECK(binorm_cdf(2.0, 1.5, Correlation(-0.5)) == doctest::Approx(0.9104680933607074).epsilon(1e-13));
}

TEST_CASE("bivariate normal CDF identities") {
  oracle::Fixture fx(11);
  for (int k = 0; k < 200; ++k) {
    const double x = fx.uniform(-4, 4);
    const double y = fx.uniform(-4, 4);
    const double r = fx.uniform(-0.999, 0.999);
    // independence
    CHECK(binorm_cdf(x, y, Correlation(0.0)) == doctest::Approx(norm_cdf(x) * norm_cdf(y)).epsilon(1e-12));
    // marginalization
    CHECK(binorm_cdf(x, kInf, Correlation(r)) == doctest::Approx(norm_cdf(x)).epsilon(1e-12));
    CHECK(binorm_cdf(-kInf, y, Correlation(r)) == 0.0);
    // reflection: P(X<=x, Y<=y; r) + P(X<=x, Y<=-y; -r) = Phi(x)
    const double sum = binorm_cdf(x, y, Correlation(r)) + binorm_cdf(x, -y, Correlation(-r));
    CHECK(std::abs(sum - norm_cdf(x)) <= 1e-12);
    // exchange symmetry
    CHECK(std::abs(binorm_cdf(x, y, Correlation(r)) - binorm_cdf(y, x, Correlation(r))) <= 1e-15);
    // arcsine orthant probability
    CHECK(std::abs(binorm_cdf(0.0, 0.0, Correlation(r)) - (0.25 + std::asin(r) / (2.0 * std::numbers::pi))) <=
          1e-12);
  }
}

TEST_CASE("bivariate normal CDF agrees with 1-D quadrature") {
  oracle::Fixture fx(5);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double x = fx.uniform(-5, 5);
    const double y = fx.uniform(-5, 5);
    const double r = k % 10 == 0 ? fx.uniform(0.99, 0.99999) * fx.sign() : fx.uniform(-0.99, 0.99);
    worst = std::max(worst, std::abs(binorm_cdf(x, y, Correlation(r)) - oracle::binorm(x, y, r)));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("bivariate normal CDF at the degenerate correlations") {
  CHECK(binorm_cdf_closed(0.3, -0.4, 1.0) == doctest::Approx(norm_cdf(-0.4)).epsilon(1e-15));
  CHECK(binorm_cdf_closed(0.3, 0.4, -1.0) == doctest::Approx(norm_cdf(0.3) + norm_cdf(0.4) - 1.0).epsilon(1e-14));
  CHECK(binorm_cdf_closed(-0.3, -0.4, -1.0) == 0.0);
  CHECK(binorm_cdf_closed(0.3, -0.4, 0.2) == binorm_cdf(0.3, -0.4, Correlation(0.2)));
  CHECK_THROWS_AS(binorm_cdf_closed(0.0, 0.0, 1.01), DomainError);
  // continuity toward the limit
  CHECK(binorm_cdf(0.3, -0.4, Correlation(1.0 - 1e-12)) == doctest::Approx(norm_cdf(-0.4)).epsilon(1e-6));
}

TEST_CASE("bivariate normal CDF stays in [0, 1] and is monotone in x") {
  oracle::Fixture fx(17);
  for (int k = 0; k < 200; ++k) {
    const double y = fx.uniform(-6, 6);
    const Correlation r(fx.uniform(-0.9999, 0.9999));
    double prev = 0.0;
    for (double x = -8.0; x <= 8.0; x += 0.5) {
      const double v = binorm_cdf(x, y, r);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(v >= prev - 1e-15);
      prev = v;
    }
  }
}
