#pragma once

// Reference estimators for the probit model: MAP/ML (probit or logit link),
// the posterior mean by Gibbs sampling or by quadrature for tiny problems,
// and Fisher-information lower bounds.

#include <cstdint>
#include <optional>
#include <vector>

#include "linprobit/linear_probit.hpp"

namespace linprobit {

enum class Link { probit, logit };

struct MapConfig {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  Link link = Link::probit;
  bool use_prior = true;  ///< false gives maximum likelihood
};

struct MapResult {
  Vector estimate;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> objective_trace;  ///< objective at the start of each iteration and at the end
};

/// Damped Newton with Armijo backtracking. Throws ConvergenceError when the
/// iteration limit is hit, when the line search stalls, or (ML only) when the
/// parameter norm exceeds 1e3, which signals separable data.
MapResult map_fit(const GeneralProbitModel& model, const Vector& y, const MapConfig& config = {});
MapResult map_fit(const SparseProbitModel& model, const Vector& y, const MapConfig& config = {});

/// Objective -sum log g(y_m (d_m^T x + m_m)) [+ (x - x_mean)^T C_x^{-1} (x - x_mean) / 2].
double map_objective(const GeneralProbitModel& model, const Vector& y, const Vector& x, const MapConfig& config = {});
Vector map_gradient(const GeneralProbitModel& model, const Vector& y, const Vector& x, const MapConfig& config = {});

struct GibbsConfig {
  int burn_in = 10'000;
  int samples = 20'000;
  std::uint64_t seed = 0;
};

struct GibbsResult {
  Vector mean;         ///< posterior-mean estimate of x
  Vector latent_mean;  ///< post-burn-in mean of the latent z
};

/// Data-augmentation Gibbs sampler; deterministic for a given seed.
GibbsResult pm_gibbs(const GeneralProbitModel& model, const Vector& y, const GibbsConfig& config = {});
GibbsResult pm_gibbs(const SparseProbitModel& model, const Vector& y, const GibbsConfig& config = {});

struct ExactPosteriorMean {
  Vector estimate;
  std::optional<double> mse;  ///< Bayesian MSE over all 2^M outcomes
  int lattice_density = 0;    ///< trapezoid points per posterior standard deviation
};

inline constexpr int kPmExactMaxParameters = 3;
inline constexpr int kPmExactMaxObservationsForMse = 12;

/// Posterior mean by trapezoid quadrature on a lattice centred at each
/// posterior mode and scaled by the curvature there, refined until successive
/// levels agree to 1e-8 relative. Requires N <= 3; the MSE additionally
/// requires M <= 12 and enumerates all 2^M response patterns.
ExactPosteriorMean pm_exact(const GeneralProbitModel& model, const Vector& y, bool with_mse = true);

enum class FisherVariant { bayesian, frequentist };

struct FisherBound {
  Vector per_component_bound;
  Vector evaluation_point;
};

/// Probit information phi(t)^2 / (Phi(t) Phi(-t)).
double probit_information(double t) noexcept;

/// diag((D^T diag(lambda) D + C_x^{-1})^{-1}) with lambda at theta; the
/// frequentist variant drops C_x^{-1} and throws SingularMatrixError when the
/// information is singular.
FisherBound fisher_lower_bound(const GeneralProbitModel& model, const Vector& theta,
                               FisherVariant variant = FisherVariant::bayesian);
FisherBound fisher_lower_bound(const SparseProbitModel& model, const Vector& theta,
                               FisherVariant variant = FisherVariant::bayesian);

}  // namespace linprobit
