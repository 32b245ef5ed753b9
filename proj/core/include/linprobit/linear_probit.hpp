#pragma once

// Linear MMSE and least-squares estimation for the probit observation model
//
//     y = sign(D x + m + w),   x ~ N(x_mean, C_x),   w ~ N(0, I),
//
// together with the exact (data-independent) MSE of both linear estimators.
// The smoothed variant y = 2 Phi((D x + w) / sigma) - 1 is supported on the
// zero-mean path (x_mean = 0, m = 0) only.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstddef>
#include <optional>

namespace linprobit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Probit regression problem: design D (M x N), bias m, Gaussian prior.
///
/// Immutable after construction; the prior covariance is validated (and its
/// Cholesky factor cached) once.
class GeneralProbitModel {
 public:
  /// Throws DimensionError on shape mismatch and DomainError when C_x is not
  /// symmetric positive definite, when smoothing_sigma < 0, or when
  /// smoothing_sigma > 0 is combined with a nonzero mean or bias.
  GeneralProbitModel(Matrix design, Vector bias, Vector prior_mean, Matrix prior_cov,
                     double smoothing_sigma = 0.0);

  /// Zero-mean, zero-bias model.
  static GeneralProbitModel centered(Matrix design, Matrix prior_cov, double smoothing_sigma = 0.0);

  const Matrix& design() const noexcept { return design_; }
  const Vector& bias() const noexcept { return bias_; }
  const Vector& prior_mean() const noexcept { return prior_mean_; }
  const Matrix& prior_cov() const noexcept { return prior_cov_; }
  const Eigen::LLT<Matrix>& prior_cov_llt() const noexcept { return prior_llt_; }
  double smoothing_sigma() const noexcept { return smoothing_sigma_; }

  Eigen::Index num_observations() const noexcept { return design_.rows(); }
  Eigen::Index num_parameters() const noexcept { return design_.cols(); }

  bool is_zero_mean() const noexcept { return zero_mean_; }
  bool has_diagonal_prior() const noexcept { return diagonal_prior_; }

  /// C_x^{-1}, formed on demand.
  Matrix prior_precision() const;

 private:
  Matrix design_;
  Vector bias_;
  Vector prior_mean_;
  Matrix prior_cov_;
  Eigen::LLT<Matrix> prior_llt_;
  double smoothing_sigma_;
  bool zero_mean_;
  bool diagonal_prior_;
};

/// Probit regression with a sparse design and an independent Gaussian prior,
/// for problems whose dense design would not fit in memory.
class SparseProbitModel {
 public:
  /// Same validation as GeneralProbitModel; prior_variance must be positive.
  SparseProbitModel(SparseMatrix design, Vector bias, Vector prior_mean, Vector prior_variance);

  /// Copies a GeneralProbitModel with diagonal prior (DomainError otherwise).
  static SparseProbitModel from_general(const GeneralProbitModel& model);

  const SparseMatrix& design() const noexcept { return design_; }
  const Vector& bias() const noexcept { return bias_; }
  const Vector& prior_mean() const noexcept { return prior_mean_; }
  const Vector& prior_variance() const noexcept { return prior_variance_; }
  Eigen::Index num_observations() const noexcept { return design_.rows(); }
  Eigen::Index num_parameters() const noexcept { return design_.cols(); }

 private:
  SparseMatrix design_;
  Vector bias_;
  Vector prior_mean_;
  Vector prior_variance_;
};

/// First and second moments of y and its cross-covariance with x.
struct LinearizedQuantities {
  Vector z_mean;  ///< D x_mean + m
  Matrix C_z;     ///< D C_x D^T + I
  Vector c;       ///< z_mean ./ sqrt(diag(C_z))
  Matrix R;       ///< correlation matrix of z
  Vector y_mean;  ///< E[y]
  Matrix C_y;     ///< Cov(y)
  Matrix E;       ///< Cov(y, x), M x N
};

/// Observations whose standardized mean exceeds this are treated as
/// deterministic.
inline constexpr double kSaturationThreshold = 37.0;

/// Computes every moment needed by the linear estimators.
LinearizedQuantities linearize(const GeneralProbitModel& model);

/// Factorization of C_y with the jitter schedule 1e-10 .. 1e-6 times the mean
/// diagonal. Throws SingularMatrixError when every level fails.
class CovarianceFactor {
 public:
  explicit CovarianceFactor(const Matrix& cov);
  Matrix solve(const Matrix& rhs) const { return llt_.solve(rhs); }
  Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }
  double jitter() const noexcept { return jitter_; }

 private:
  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

enum class SolvePath { dense_cholesky, sparse_cg, structured_kronecker, matrix_free_cg };

const char* to_string(SolvePath path) noexcept;

struct FitOptions {
  /// W is stored only when N * M is below this many entries.
  std::size_t weight_entry_limit = 10'000'000;
};

struct LmmseSolution {
  Vector estimate;
  /// tr(C_x - E^T C_y^{-1} E); absent when the solve path cannot afford it.
  std::optional<double> predicted_mse;
  Vector per_component_mse;     ///< empty when predicted_mse is absent
  std::optional<Matrix> weights;  ///< W (N x M)
  Vector offset;                ///< b = x_mean - W y_mean
  double jitter = 0.0;
  SolvePath path = SolvePath::dense_cholesky;
};

struct PredictedMse {
  double total = 0.0;
  Vector per_component;
};

/// Validates y (length M; entries +-1, or values in [-1, 1] for the smoothed
/// model y = 2 Phi((D x + w) / sigma) - 1). Throws DomainError/DimensionError.
void check_binary_observations(const GeneralProbitModel& model, const Vector& y);

LmmseSolution lmmse_fit(const GeneralProbitModel& model, const Vector& y, const FitOptions& options = {});

/// Same as above with precomputed (or deliberately substituted) moments.
LmmseSolution lmmse_fit(const GeneralProbitModel& model, const LinearizedQuantities& lin, const Vector& y,
                        const FitOptions& options = {});

/// Data-independent MSE of the linear MMSE estimator.
PredictedMse lmmse_predicted_mse(const GeneralProbitModel& model);
PredictedMse lmmse_predicted_mse(const GeneralProbitModel& model, const LinearizedQuantities& lin);

/// Least-squares estimate C_x E^+ y and its exact MSE. Zero-mean models only;
/// requires M >= N and E of full column rank (DomainError otherwise).
LmmseSolution ls_fit(const GeneralProbitModel& model, const Vector& y);
LmmseSolution ls_fit(const GeneralProbitModel& model, const LinearizedQuantities& lin, const Vector& y);

/// C_y in sparse form for a diagonal-prior zero-mean model: entry (i, j) is
/// stored exactly when rows i and j of D share a nonzero column. Stored
/// values are bit-identical to linearize(model).C_y.
SparseMatrix sparse_cy(const GeneralProbitModel& model);

struct CgOptions {
  double relative_tolerance = 1e-10;
  int max_iterations = 10'000;
};

/// Solves A x = b for symmetric positive definite A given as a callable
/// v -> A v. Throws ConvergenceError if the tolerance is not met.
template <class Apply>
Vector conjugate_gradient(Apply&& apply, const Vector& rhs, const CgOptions& options = {});

/// Linear MMSE estimate computed through sparse_cy and conjugate gradients.
/// W is never formed; predicted_mse is filled only when requested (N extra
/// CG solves).
LmmseSolution lmmse_fit_sparse(const GeneralProbitModel& model, const Vector& y, bool with_mse = false,
                               const CgOptions& options = {});

// ---------------------------------------------------------------------------

[[noreturn]] void throw_cg_failure(int iterations);

template <class Apply>
Vector conjugate_gradient(Apply&& apply, const Vector& rhs, const CgOptions& options) {
  Vector x = Vector::Zero(rhs.size());
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return x;
  Vector r = rhs;
  Vector p = r;
  double rr = r.squaredNorm();
  const double target = options.relative_tolerance * rhs_norm;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Vector ap = apply(p);
    const double alpha = rr / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    if (std::sqrt(rr_next) <= target) return x;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  throw_cg_failure(options.max_iterations);
}

}  // namespace linprobit
