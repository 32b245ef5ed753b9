#include <cmath>
#include <vector>

#include "doctest.h"
#include "linprobit/errors.hpp"
#include "linprobit/metrics.hpp"
#include "oracles.hpp"

using namespace linprobit;

TEST_CASE("accuracy") {
  CHECK(accuracy({0.9, 0.2}, {1, -1}) == 1.0);
  CHECK(accuracy({0.9, 0.2}, {-1, 1}) == 0.0);
  CHECK(accuracy({0.5}, {1}) == 1.0);
  CHECK(accuracy({0.1, 0.7, 0.6, 0.3}, {1, 1, -1, -1}) == 0.5);
  CHECK_THROWS_AS(accuracy({}, {}), DimensionError);
  CHECK_THROWS_AS(accuracy({0.5, 0.5}, {1}), DimensionError);
  CHECK_THROWS_AS(accuracy({1.5}, {1}), DomainError);
}

TEST_CASE("area under the ROC curve") {
  CHECK(auc({0.1, 0.4, 0.35, 0.8}, {-1, 1, -1, 1}) == 1.0);
  CHECK(auc({0.9, 0.1}, {-1, 1}) == 0.0);
  CHECK(auc({0.8, 0.8}, {1, -1}) == 0.5);
  // 2 positives x 2 negatives: pairs (0.4>0.1), (0.4>0.5 no), (0.6>0.1), (0.6>0.5)
  CHECK(auc({0.4, 0.6, 0.1, 0.5}, {1, 1, -1, -1}) == 0.75);
  CHECK_THROWS_AS(auc({0.3, 0.4}, {1, 1}), DomainError);
}

TEST_CASE("AUC is invariant under monotone transforms and matches pair counting") {
  oracle::Fixture fx(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = fx.integer(2, 60);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (int k = 0; k < n; ++k) {
      s[k] = std::round(fx.uniform(0, 1) * 10.0) / 10.0;  // plenty of ties
      l[k] = k == 0 ? 1 : k == 1 ? -1 : fx.sign();
    }
    double wins = 0.0, pairs = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (l[i] == 1 && l[j] == -1) {
          pairs += 1.0;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    const double a = auc(s, l);
    CHECK(a == doctest::Approx(wins / pairs).epsilon(1e-14));
    std::vector<double> t(n);
    for (int k = 0; k < n; ++k) t[k] = std::exp(3.0 * s[k]) - 7.0;
    CHECK(auc(t, l) == a);
  }
}

TEST_CASE("mean and sample standard deviation") {
  const MeanStd m = mean_std({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == 2.5);
  CHECK(m.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(mean_std({7.0}).stddev == 0.0);
  CHECK(mean_std({}).mean == 0.0);
}
