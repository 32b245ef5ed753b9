#include <cmath>
#include <vector>

#include "doctest.h"
#include "linprobit/random.hpp"
#include "oracles.hpp"

using namespace linprobit;

TEST_CASE("streams are reproducible and keyed") {
  Rng a({7, 1, 2});
  Rng b({7, 1, 2});
  Rng c({7, 2, 1});
  bool differs = false;
  for (int k = 0; k < 100; ++k) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs = differs || x != c.normal();
  }
  CHECK(differs);
  CHECK(Rng(5).next_u64() == Rng(5).next_u64());
}

TEST_CASE("uniform draws lie strictly inside (0, 1)") {
  Rng rng(3);
  double sum = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("normal draws have unit moments") {
  Rng rng(4);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double z = rng.normal(1.5, 2.0);
    s1 += z;
    s2 += z * z;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  CHECK(std::abs(mean - 1.5) < 5.0 * 2.0 / std::sqrt(n));
  CHECK(std::abs(var - 4.0) < 5.0 * 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("truncated normal draws respect the side and the conditional mean") {
  Rng rng(9);
  const int n = 40000;
  for (double mean : {-12.0, -2.0, 0.0, 3.0, 9.5}) {
    for (bool positive : {true, false}) {
      double sum = 0.0;
      for (int k = 0; k < n; ++k) {
        const double z = rng.truncated_unit_normal(mean, positive);
        REQUIRE((positive ? z > 0.0 : z < 0.0));
        sum += z;
      }
      // E[z | z > 0] = mu + phi(mu)/Phi(mu); mirrored for the negative side.
      const double s = positive ? 1.0 : -1.0;
      const double mu = s * mean;
      const double lambda = std::exp(std::log(oracle::phi(mu)) - std::log(oracle::Phi(mu)));
      const double expected = s * (mu + (std::isfinite(lambda) ? lambda : -mu));
      // Conditional standard deviation is below 1.
      CHECK(std::abs(sum / n - expected) < 5.0 / std::sqrt(n));
    }
  }
}
