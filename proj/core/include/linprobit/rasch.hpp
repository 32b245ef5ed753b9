#pragma once

// Rasch model p(Y_ui = 1) = Phi(a_u - d_i) as a probit regression with stacked
// parameter x = [a; -d] and design D = [1_Q (x) I_U, I_Q (x) 1_U]. Rows of the
// full design are item-major: row i*U + u holds pair (u, i).

#include <array>

#include "linprobit/data.hpp"
#include "linprobit/linear_probit.hpp"

namespace linprobit {

struct RaschDesign {
  int users = 1;
  int items = 1;
  double sigma2_ability = 1.0;
  double sigma2_difficulty = 1.0;

  /// Throws DomainError unless users, items >= 1 and both variances > 0.
  void validate() const;
  bool equal_variances() const noexcept { return sigma2_ability == sigma2_difficulty; }
  int num_parameters() const noexcept { return users + items; }
};

/// Full design, or the rows of the observed pairs (in observation order) when
/// `observed` is given. Zero bias, zero prior mean, diagonal prior.
GeneralProbitModel rasch_design_matrix(const RaschDesign& design, const ResponseSet* observed = nullptr);

/// Sparse counterpart for the baseline estimators on large response sets.
SparseProbitModel rasch_sparse_model(const RaschDesign& design, const ResponseSet& observed);

/// y vector in the row order of rasch_design_matrix(design, &observed).
Vector response_vector(const ResponseSet& observed);

/// y vector of a U x Q response matrix in the item-major row order of the full design.
Vector response_vector(const Eigen::MatrixXi& responses);

struct RaschEstimates {
  Vector ability;     ///< a, length U
  Vector difficulty;  ///< d, length Q
};

/// Splits a stacked estimate [a; -d] into abilities and difficulties.
RaschEstimates split_estimate(const Vector& stacked, int users);

/// (2/pi) asin(sigma2 / (2 sigma2 + 1)); lies in [0, 1/3).
double rasch_s(double sigma2);

struct RaschMse {
  double ability = 0.0;     ///< per-user MSE
  double difficulty = 0.0;  ///< per-item MSE
};

/// Closed-form per-component MSE of the linear MMSE estimator for a full
/// response matrix with sigma2_a = sigma2_d = sigma2 (sigma2 >= 0).
RaschMse rasch_closed_form_mse(int users, int items, double sigma2);

/// Same, for a design with equal variances (DomainError otherwise).
RaschMse rasch_closed_form_mse(const RaschDesign& design);

struct RaschMseReport {
  RaschMse mse;
  bool closed_form = true;  ///< false when unequal variances forced the dense path
};

/// Closed form when the variances agree, otherwise the mean ability and
/// difficulty diagonals of the dense predicted MSE.
RaschMseReport rasch_mse(const RaschDesign& design);

/// Limit of the per-user MSE as U, Q -> infinity.
double rasch_asymptotic_mse(double sigma2);

/// Entries of C_y^{-1} = 1_{QxQ} (x) A + I_Q (x) B for the full design, where A
/// has c on the diagonal and d elsewhere and B has a - c on the diagonal and
/// b - d elsewhere.
struct StructuredCyInverse {
  int users = 1;
  int items = 1;
  double s = 0.0;
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  double r = 1.0;

  /// C_y^{-1} v for v in item-major order, O(UQ).
  Vector apply(const Vector& v) const;
  /// Materialized UQ x UQ inverse (small problems only).
  Matrix dense() const;
  /// Residuals of the four defining linear equations.
  std::array<double, 4> equation_residuals() const;
};

/// Throws DomainError if the common denominator vanishes.
StructuredCyInverse structured_cy_inverse(int users, int items, double sigma2);
StructuredCyInverse structured_cy_inverse(const RaschDesign& design);

/// Linear MMSE fit for a full U x Q response matrix (entries +-1) in O(UQ)
/// time and memory. The estimate is stacked [a; -d]; per-component MSE uses
/// the closed form.
LmmseSolution rasch_fast_lmmse_fit(const RaschDesign& design, const Eigen::MatrixXi& responses);

struct RaschCgOptions {
  CgOptions cg;
  /// Also compute the per-component predicted MSE (one CG solve per parameter).
  bool with_mse = false;
};

/// Linear MMSE fit for an arbitrary set of observed pairs using a matrix-free
/// C_y operator (supports unequal prior variances). Estimate stacked [a; -d].
LmmseSolution rasch_lmmse_fit(const RaschDesign& design, const ResponseSet& observed,
                              const RaschCgOptions& options = {});

/// Ability estimation with known item difficulties.
struct KnownDifficultyModel {
  Vector difficulties;  ///< d, length Q
  double prior_mean = 0.0;
  double sigma2 = 1.0;
};

/// Precomputes the linear weights so many response vectors can share them.
class KnownDifficultyEstimator {
 public:
  explicit KnownDifficultyEstimator(const KnownDifficultyModel& model);

  /// a_hat = w^T y + b for a +-1 vector y of length Q.
  double estimate(const Vector& y) const;
  double predicted_mse() const noexcept { return predicted_mse_; }
  const Vector& weights() const noexcept { return weights_; }
  double offset() const noexcept { return offset_; }
  double jitter() const noexcept { return jitter_; }

 private:
  Vector weights_;
  double offset_ = 0.0;
  double predicted_mse_ = 0.0;
  double jitter_ = 0.0;
};

struct KnownDifficultyFit {
  double ability = 0.0;
  double predicted_mse = 0.0;
};

KnownDifficultyFit known_difficulty_fit(const KnownDifficultyModel& model, const Vector& y);

}  // namespace linprobit
