#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the library under test.

#include <Eigen/Core>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline double Phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// P(X <= x, Y <= y) = int_{-inf}^{x} phi(s) Phi((y - rho s) / sqrt(1 - rho^2)) ds
/// by adaptive Gauss-Kronrod, split where the inner CDF switches. Mass below
/// s = -40 is under 1e-300 and is dropped.
inline double binorm(double x, double y, double rho) {
  using boost::math::quadrature::gauss_kronrod;
  const double q = std::sqrt(1.0 - rho * rho);
  auto f = [&](double s) { return phi(s) * Phi((y - rho * s) / q); };
  auto integrate = [&](double a, double b) {
    if (!(a < b)) return 0.0;
    return gauss_kronrod<double, 61>::integrate(f, a, b, 12, 1e-14);
  };
  double lo = -40.0;
  const double hi = std::min(x, 40.0);
  double total = 0.0;
  std::vector<double> cuts;
  if (rho != 0.0) {
    const double kink = y / rho;
    for (double w : {-8.0, -2.0, 0.0, 2.0, 8.0}) cuts.push_back(kink + w * q / std::abs(rho));
  }
  std::sort(cuts.begin(), cuts.end());
  for (double cut : cuts)
    if (cut > lo && cut < hi) {
      total += integrate(lo, cut);
      lo = cut;
    }
  total += integrate(lo, hi);
  return total;
}

/// Dense C_y of the full Rasch design with equal variances (arcsine law);
/// rows item-major.
inline Eigen::MatrixXd rasch_cy(int U, int Q, double sigma2) {
  const double s = 2.0 / std::numbers::pi * std::asin(sigma2 / (2.0 * sigma2 + 1.0));
  Eigen::MatrixXd cy(U * Q, U * Q);
  for (int i = 0; i < Q; ++i)
    for (int u = 0; u < U; ++u)
      for (int j = 0; j < Q; ++j)
        for (int v = 0; v < U; ++v) {
          double value = 0.0;
          if (i == j && u == v) value = 1.0;
          else if (i == j || u == v) value = s;
          cy(i * U + u, j * U + v) = value;
        }
  return cy;
}

/// Rasch design D (item-major rows) built directly from its definition.
inline Eigen::MatrixXd rasch_design(int U, int Q) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(U * Q, U + Q);
  for (int i = 0; i < Q; ++i)
    for (int u = 0; u < U; ++u) {
      D(i * U + u, u) = 1.0;
      D(i * U + u, U + i) = 1.0;
    }
  return D;
}

/// Posterior mean of a scalar x ~ N(m, v) given k observations y = sign(x + w)
/// with all responses equal to `sign`, by direct 1-D quadrature.
inline double scalar_posterior_mean(double m, double v, int k, int sign) {
  using boost::math::quadrature::gauss_kronrod;
  const double sd = std::sqrt(v);
  auto lik = [&](double x) { return std::pow(Phi(sign * x), k); };
  auto num = [&](double x) { return x * phi((x - m) / sd) / sd * lik(x); };
  auto den = [&](double x) { return phi((x - m) / sd) / sd * lik(x); };
  const double inf = std::numeric_limits<double>::infinity();
  return gauss_kronrod<double, 61>::integrate(num, -inf, inf, 20, 1e-14) /
         gauss_kronrod<double, 61>::integrate(den, -inf, inf, 20, 1e-14);
}

/// Monte Carlo z-scores for several simultaneous comparisons. The threshold
/// keeps the family-wise false-alarm rate at that of a single 3-sigma check
/// (0.27%), so each comparison is judged at the Sidak-adjusted level.
class ZScores {
 public:
  /// sum and sum2 are the running sums of a quantity and of its square.
  void add(const std::string& name, double sum, double sum2, double n, double expected) {
    const double mean = sum / n;
    const double se = std::sqrt(std::max(sum2 / n - mean * mean, 0.0) / n);
    const double z = se > 0.0 ? (mean - expected) / se : (mean == expected ? 0.0 : INFINITY);
    entries_.push_back({name, z});
  }
  double max_abs() const {
    double m = 0.0;
    for (const auto& e : entries_) m = std::max(m, std::abs(e.second));
    return m;
  }
  double threshold() const {
    const double alpha = 1.0 - std::pow(1.0 - 0.0027, 1.0 / static_cast<double>(entries_.size()));
    return boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
  }
  std::string report() const {
    std::ostringstream os;
    for (const auto& e : entries_) os << e.first << ": z=" << e.second << "\n";
    return os.str();
  }

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

/// Deterministic random source for test fixtures.
class Fixture {
 public:
  explicit Fixture(std::uint64_t seed) : engine_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(engine_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  int sign() { return integer(0, 1) ? 1 : -1; }
  Eigen::MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal();
    return m;
  }
  Eigen::VectorXd signs(Eigen::Index n) {
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = sign();
    return y;
  }
  /// Random SPD matrix A A^T / n + 0.2 I.
  Eigen::MatrixXd spd(Eigen::Index n) {
    const Eigen::MatrixXd a = normal_matrix(n, n);
    Eigen::MatrixXd out = a * a.transpose() / static_cast<double>(n);
    out.diagonal().array() += 0.2;
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace oracle
