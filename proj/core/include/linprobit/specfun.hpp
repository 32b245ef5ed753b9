#pragma once

// Scalar normal-distribution kernels shared by every estimator.
//
// All functions are pure and thread-safe. Infinite arguments are accepted
// as saturation sentinels where that makes sense (Phi(+inf) = 1, etc.).

namespace linprobit {

/// Correlation coefficient strictly inside (-1, 1).
class Correlation {
 public:
  /// Throws DomainError unless |rho| < 1 and rho is finite.
  explicit Correlation(double rho);
  double value() const noexcept { return rho_; }

 private:
  double rho_;
};

/// Standard normal density.
double norm_pdf(double x) noexcept;

/// log of the standard normal density.
double log_norm_pdf(double x) noexcept;

/// Standard normal CDF, erfc-based.
double norm_cdf(double x) noexcept;

/// log(Phi(x)); finite for every finite x. Uses an asymptotic series below -30.
double log_norm_cdf(double x) noexcept;

/// Inverse Mills ratio phi(x)/Phi(x), stable for very negative x.
double inv_mills(double x) noexcept;

/// Quantile function of the standard normal (Wichura AS241, ~1e-16 relative).
/// Throws DomainError for p outside (0, 1).
double norm_cdf_inv(double p);

/// Lower-tail quantile from log(p), log_p <= 0. Lets samplers reach
/// probabilities far below the smallest positive double.
double norm_cdf_inv_log(double log_p);

/// Bivariate standard normal CDF P(X <= x, Y <= y) with correlation rho.
///
/// Drezner-Wesolowsky/Genz Gauss-Legendre scheme: 6/12/20 nodes chosen by
/// |rho|, and a separate expansion around |rho| = 1 for |rho| >= 0.925.
/// Absolute error is below 1e-14 in practice.
double binorm_cdf(double x, double y, Correlation rho) noexcept;

/// Same as above for any rho in [-1, 1]; the endpoints use the degenerate
/// limits Phi(min(x, y)) and max(0, Phi(x) + Phi(y) - 1).
double binorm_cdf_closed(double x, double y, double rho);

}  // namespace linprobit
