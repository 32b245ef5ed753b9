#include "linprobit/linear_probit.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "linprobit/errors.hpp"
#include "linprobit/specfun.hpp"

namespace linprobit {

namespace {

constexpr double kTwoOverPi = 2.0 / std::numbers::pi;
constexpr double kSaturatedMean = 1.0 - 1e-16;

bool is_diagonal(const Matrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

struct GramEntry {
  Eigen::Index row;
  Eigen::Index col;
  double value;
};

// Upper-triangle entries of D diag(w) D^T restricted to row pairs that share a
// nonzero column. Each entry sums w_k * (D_ik * D_jk) in ascending k, so the
// dense and sparse assemblies see identical floating-point values.
std::vector<GramEntry> diagonal_gram(const Matrix& design, const Vector& weights) {
  const Eigen::Index m = design.rows();
  const Eigen::Index n = design.cols();
  std::vector<std::vector<Eigen::Index>> row_nz(m), col_nz(n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      if (design(i, k) != 0.0) {
        row_nz[i].push_back(k);
        col_nz[k].push_back(i);
      }

  std::vector<GramEntry> out;
  std::vector<double> acc(m, 0.0);
  std::vector<char> touched(m, 0);
  std::vector<Eigen::Index> touched_list;
  for (Eigen::Index i = 0; i < m; ++i) {
    touched_list.clear();
    for (Eigen::Index k : row_nz[i]) {
      for (Eigen::Index j : col_nz[k]) {
        if (j < i) continue;
        if (!touched[j]) {
          touched[j] = 1;
          touched_list.push_back(j);
        }
        acc[j] += weights[k] * (design(i, k) * design(j, k));
      }
    }
    std::sort(touched_list.begin(), touched_list.end());
    for (Eigen::Index j : touched_list) {
      out.push_back({i, j, acc[j]});
      acc[j] = 0.0;
      touched[j] = 0;
    }
  }
  return out;
}

// (2/pi) asin of the smoothed correlation; shared by the dense and sparse paths.
double arcsine_entry(double cz_ij, double scale_i, double scale_j) {
  const double rho = cz_ij / std::sqrt(scale_i * scale_j);
  return kTwoOverPi * std::asin(std::clamp(rho, -1.0, 1.0));
}

double smoothing_variance(const GeneralProbitModel& model) {
  return model.smoothing_sigma() * model.smoothing_sigma();
}

// E = diag(2 phi(c) / sqrt(diag C_z)) D C_x (hard sign) or
// sqrt(2/pi) diag(1 / sqrt(sigma^2 + diag C_z)) D C_x (smoothed, c = 0).
Matrix cross_covariance(const GeneralProbitModel& model, const Vector& c, const Vector& cz_diag) {
  const double s2 = smoothing_variance(model);
  Vector scale(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (s2 > 0.0)
      scale[i] = std::sqrt(kTwoOverPi) / std::sqrt(s2 + cz_diag[i]);
    else
      scale[i] = 2.0 * norm_pdf(c[i]) / std::sqrt(cz_diag[i]);
  }
  return scale.asDiagonal() * (model.design() * model.prior_cov());
}

void fill_solution_mse(const GeneralProbitModel& model, const Matrix& E, const Matrix& cy_inv_e, LmmseSolution& sol) {
  const Eigen::Index n = model.num_parameters();
  sol.per_component_mse.resize(n);
  for (Eigen::Index k = 0; k < n; ++k)
    sol.per_component_mse[k] = model.prior_cov()(k, k) - E.col(k).dot(cy_inv_e.col(k));
  sol.predicted_mse = sol.per_component_mse.sum();
}

}  // namespace

// ---------------------------------------------------------------------------
// GeneralProbitModel

GeneralProbitModel::GeneralProbitModel(Matrix design, Vector bias, Vector prior_mean, Matrix prior_cov,
                                       double smoothing_sigma)
    : design_(std::move(design)),
      bias_(std::move(bias)),
      prior_mean_(std::move(prior_mean)),
      prior_cov_(std::move(prior_cov)),
      smoothing_sigma_(smoothing_sigma) {
  const Eigen::Index m = design_.rows();
  const Eigen::Index n = design_.cols();
  if (m < 1 || n < 1) throw DimensionError("design matrix must be nonempty");
  if (bias_.size() != m) throw DimensionError("bias length must equal the number of design rows");
  if (prior_mean_.size() != n) throw DimensionError("prior mean length must equal the number of design columns");
  if (prior_cov_.rows() != n || prior_cov_.cols() != n)
    throw DimensionError("prior covariance must be N x N");
  if (!design_.allFinite() || !bias_.allFinite() || !prior_mean_.allFinite() || !prior_cov_.allFinite())
    throw DomainError("model inputs must be finite");
  if (!(smoothing_sigma_ >= 0.0) || !std::isfinite(smoothing_sigma_))
    throw DomainError("smoothing sigma must be a finite nonnegative number");

  const double scale = std::max(1.0, prior_cov_.cwiseAbs().maxCoeff());
  if ((prior_cov_ - prior_cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError("prior covariance must be symmetric");
  prior_llt_.compute(prior_cov_);
  if (prior_llt_.info() != Eigen::Success) throw DomainError("prior covariance must be positive definite");

  zero_mean_ = prior_mean_.isZero(0.0) && bias_.isZero(0.0);
  diagonal_prior_ = is_diagonal(prior_cov_);
  if (smoothing_sigma_ > 0.0 && !zero_mean_)
    throw DomainError("smoothing sigma > 0 is only supported with zero prior mean and zero bias");
}

GeneralProbitModel GeneralProbitModel::centered(Matrix design, Matrix prior_cov, double smoothing_sigma) {
  const Eigen::Index m = design.rows();
  const Eigen::Index n = design.cols();
  return GeneralProbitModel(std::move(design), Vector::Zero(m), Vector::Zero(n), std::move(prior_cov),
                            smoothing_sigma);
}

Matrix GeneralProbitModel::prior_precision() const {
  return prior_llt_.solve(Matrix::Identity(prior_cov_.rows(), prior_cov_.cols()));
}

SparseProbitModel::SparseProbitModel(SparseMatrix design, Vector bias, Vector prior_mean, Vector prior_variance)
    : design_(std::move(design)),
      bias_(std::move(bias)),
      prior_mean_(std::move(prior_mean)),
      prior_variance_(std::move(prior_variance)) {
  const Eigen::Index m = design_.rows();
  const Eigen::Index n = design_.cols();
  if (m < 1 || n < 1) throw DimensionError("design matrix must be nonempty");
  if (bias_.size() != m) throw DimensionError("bias length must equal the number of design rows");
  if (prior_mean_.size() != n || prior_variance_.size() != n)
    throw DimensionError("prior mean and variance lengths must equal the number of design columns");
  if (!bias_.allFinite() || !prior_mean_.allFinite() || !prior_variance_.allFinite())
    throw DomainError("model inputs must be finite");
  for (Eigen::Index k = 0; k < design_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(design_, k); it; ++it)
      if (!std::isfinite(it.value())) throw DomainError("model inputs must be finite");
  if ((prior_variance_.array() <= 0.0).any()) throw DomainError("prior variances must be positive");
  design_.makeCompressed();
}

SparseProbitModel SparseProbitModel::from_general(const GeneralProbitModel& model) {
  if (!model.has_diagonal_prior()) throw DomainError("sparse model requires a diagonal prior covariance");
  return SparseProbitModel(model.design().sparseView(), model.bias(), model.prior_mean(),
                           model.prior_cov().diagonal());
}

// ---------------------------------------------------------------------------
// Moments

LinearizedQuantities linearize(const GeneralProbitModel& model) {
  const Eigen::Index m = model.num_observations();
  const Matrix& D = model.design();
  const double s2 = smoothing_variance(model);

  LinearizedQuantities lin;
  lin.z_mean = D * model.prior_mean() + model.bias();

  if (model.has_diagonal_prior()) {
    lin.C_z = Matrix::Zero(m, m);
    for (const GramEntry& e : diagonal_gram(D, model.prior_cov().diagonal())) {
      lin.C_z(e.row, e.col) = e.value;
      lin.C_z(e.col, e.row) = e.value;
    }
    lin.C_z.diagonal().array() += 1.0;
  } else {
    lin.C_z = D * model.prior_cov() * D.transpose();
    lin.C_z = 0.5 * (lin.C_z + lin.C_z.transpose()).eval();
    lin.C_z.diagonal().array() += 1.0;
  }

  const Vector cz_diag = lin.C_z.diagonal();
  lin.c = lin.z_mean.cwiseQuotient(cz_diag.cwiseSqrt());

  lin.R.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      lin.R(i, j) = i == j ? 1.0 : std::clamp(lin.C_z(i, j) / std::sqrt(cz_diag[i] * cz_diag[j]), -1.0, 1.0);

  std::vector<char> saturated(m, 0);
  lin.y_mean.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double ci = lin.c[i];
    if (std::abs(ci) > kSaturationThreshold) {
      saturated[i] = 1;
      lin.y_mean[i] = std::copysign(kSaturatedMean, ci);
    } else {
      lin.y_mean[i] = std::erf(ci / std::numbers::sqrt2);
    }
  }

  lin.C_y.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (s2 > 0.0)
      lin.C_y(i, i) = kTwoOverPi * std::asin(cz_diag[i] / (s2 + cz_diag[i]));
    else
      lin.C_y(i, i) = 1.0 - lin.y_mean[i] * lin.y_mean[i];
    for (Eigen::Index j = i + 1; j < m; ++j) {
      double v;
      if (saturated[i] || saturated[j]) {
        v = 0.0;
      } else if (s2 > 0.0) {
        v = arcsine_entry(lin.C_z(i, j), s2 + cz_diag[i], s2 + cz_diag[j]);
      } else if (lin.c[i] == 0.0 && lin.c[j] == 0.0) {
        v = arcsine_entry(lin.C_z(i, j), cz_diag[i], cz_diag[j]);
      } else {
        const double rho = lin.R(i, j);
        const double ci = lin.c[i];
        const double cj = lin.c[j];
        v = 2.0 * (binorm_cdf_closed(ci, cj, rho) + binorm_cdf_closed(-ci, -cj, rho)) - 1.0 -
            lin.y_mean[i] * lin.y_mean[j];
      }
      lin.C_y(i, j) = v;
      lin.C_y(j, i) = v;
    }
  }

  lin.E = cross_covariance(model, lin.c, cz_diag);
  return lin;
}

CovarianceFactor::CovarianceFactor(const Matrix& cov) {
  llt_.compute(cov);
  if (llt_.info() == Eigen::Success) return;
  const double mean_diag = std::max(cov.diagonal().mean(), 1e-300);
  for (double level = 1e-10; level <= 1e-6 * 1.0001; level *= 10.0) {
    jitter_ = level * mean_diag;
    Matrix jittered = cov;
    jittered.diagonal().array() += jitter_;
    llt_.compute(jittered);
    if (llt_.info() == Eigen::Success) return;
  }
  throw SingularMatrixError("covariance of the observations is not positive definite", jitter_);
}

const char* to_string(SolvePath path) noexcept {
  switch (path) {
    case SolvePath::dense_cholesky: return "dense_cholesky";
    case SolvePath::sparse_cg: return "sparse_cg";
    case SolvePath::structured_kronecker: return "structured_kronecker";
    case SolvePath::matrix_free_cg: return "matrix_free_cg";
  }
  return "unknown";
}

void check_binary_observations(const GeneralProbitModel& model, const Vector& y) {
  if (y.size() != model.num_observations()) throw DimensionError("observation vector length must equal M");
  if (model.smoothing_sigma() > 0.0) {
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (!(std::abs(y[i]) <= 1.0)) throw DomainError("smoothed observations must lie in [-1, 1]");
    return;
  }
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 1.0 && y[i] != -1.0) throw DomainError("observations must be +1 or -1");
}

// ---------------------------------------------------------------------------
// Linear MMSE

LmmseSolution lmmse_fit(const GeneralProbitModel& model, const Vector& y, const FitOptions& options) {
  return lmmse_fit(model, linearize(model), y, options);
}

LmmseSolution lmmse_fit(const GeneralProbitModel& model, const LinearizedQuantities& lin, const Vector& y,
                        const FitOptions& options) {
  check_binary_observations(model, y);
  const CovarianceFactor factor(lin.C_y);
  const Matrix cy_inv_e = factor.solve(lin.E);  // C_y^{-1} E, so W = cy_inv_e^T

  LmmseSolution sol;
  sol.path = SolvePath::dense_cholesky;
  sol.jitter = factor.jitter();
  sol.offset = model.prior_mean() - cy_inv_e.transpose() * lin.y_mean;
  sol.estimate = cy_inv_e.transpose() * y + sol.offset;
  fill_solution_mse(model, lin.E, cy_inv_e, sol);
  const auto entries = static_cast<std::size_t>(model.num_parameters()) *
                       static_cast<std::size_t>(model.num_observations());
  if (entries < options.weight_entry_limit) sol.weights = cy_inv_e.transpose();
  return sol;
}

PredictedMse lmmse_predicted_mse(const GeneralProbitModel& model) {
  return lmmse_predicted_mse(model, linearize(model));
}

PredictedMse lmmse_predicted_mse(const GeneralProbitModel& model, const LinearizedQuantities& lin) {
  const CovarianceFactor factor(lin.C_y);
  const Matrix cy_inv_e = factor.solve(lin.E);
  LmmseSolution tmp;
  fill_solution_mse(model, lin.E, cy_inv_e, tmp);
  return {*tmp.predicted_mse, tmp.per_component_mse};
}

// ---------------------------------------------------------------------------
// Least squares

LmmseSolution ls_fit(const GeneralProbitModel& model, const Vector& y) { return ls_fit(model, linearize(model), y); }

LmmseSolution ls_fit(const GeneralProbitModel& model, const LinearizedQuantities& lin, const Vector& y) {
  check_binary_observations(model, y);
  if (!model.is_zero_mean()) throw DomainError("the LS estimator requires zero prior mean and zero bias");
  const Eigen::Index m = model.num_observations();
  const Eigen::Index n = model.num_parameters();
  if (m < n) throw DomainError("the LS estimator requires at least as many observations as parameters");

  const Eigen::ColPivHouseholderQR<Matrix> qr(lin.E);
  if (qr.rank() < n) throw DomainError("the LS estimator requires E with linearly independent columns");

  // E^+ = (E^T E)^{-1} E^T
  const Matrix pinv = (lin.E.transpose() * lin.E).llt().solve(lin.E.transpose());
  const Matrix W = model.prior_cov() * pinv;

  LmmseSolution sol;
  sol.path = SolvePath::dense_cholesky;
  sol.offset = Vector::Zero(n);
  sol.estimate = W * y;
  const Matrix mse = W * lin.C_y * W.transpose() - model.prior_cov();
  sol.per_component_mse = mse.diagonal();
  sol.predicted_mse = sol.per_component_mse.sum();
  sol.weights = W;
  return sol;
}

// ---------------------------------------------------------------------------
// Sparse path

SparseMatrix sparse_cy(const GeneralProbitModel& model) {
  if (!model.has_diagonal_prior()) throw DomainError("sparse C_y requires a diagonal prior covariance");
  if (!model.is_zero_mean()) throw DomainError("sparse C_y requires zero prior mean and zero bias");
  const Eigen::Index m = model.num_observations();
  const double s2 = smoothing_variance(model);

  const std::vector<GramEntry> gram = diagonal_gram(model.design(), model.prior_cov().diagonal());
  Vector cz_diag = Vector::Ones(m);
  for (const GramEntry& e : gram)
    if (e.row == e.col) cz_diag[e.row] += e.value;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * gram.size() + static_cast<std::size_t>(m));
  std::vector<char> has_diag(m, 0);
  for (const GramEntry& e : gram) {
    if (e.row == e.col) {
      has_diag[e.row] = 1;
      const double d = s2 > 0.0 ? kTwoOverPi * std::asin(cz_diag[e.row] / (s2 + cz_diag[e.row])) : 1.0;
      triplets.emplace_back(e.row, e.col, d);
      continue;
    }
    const double v = arcsine_entry(e.value, s2 + cz_diag[e.row], s2 + cz_diag[e.col]);
    triplets.emplace_back(e.row, e.col, v);
    triplets.emplace_back(e.col, e.row, v);
  }
  for (Eigen::Index i = 0; i < m; ++i)
    if (!has_diag[i]) {
      const double d = s2 > 0.0 ? kTwoOverPi * std::asin(1.0 / (s2 + 1.0)) : 1.0;
      triplets.emplace_back(i, i, d);
    }
  SparseMatrix cy(m, m);
  cy.setFromTriplets(triplets.begin(), triplets.end());
  return cy;
}

void throw_cg_failure(int iterations) {
  throw ConvergenceError("conjugate gradients did not converge within " + std::to_string(iterations) +
                         " iterations");
}

LmmseSolution lmmse_fit_sparse(const GeneralProbitModel& model, const Vector& y, bool with_mse,
                               const CgOptions& options) {
  check_binary_observations(model, y);
  const SparseMatrix cy = sparse_cy(model);
  const Eigen::Index m = model.num_observations();

  Vector cz_diag = Vector::Ones(m);
  const Matrix& D = model.design();
  const Vector w = model.prior_cov().diagonal();
  for (Eigen::Index i = 0; i < m; ++i) cz_diag[i] += D.row(i).cwiseAbs2().dot(w);
  const Matrix E = cross_covariance(model, Vector::Zero(m), cz_diag);

  auto apply = [&cy](const Vector& v) -> Vector { return cy * v; };
  LmmseSolution sol;
  sol.path = SolvePath::sparse_cg;
  sol.offset = Vector::Zero(model.num_parameters());
  sol.estimate = E.transpose() * conjugate_gradient(apply, y, options);
  if (with_mse) {
    Matrix cy_inv_e(m, model.num_parameters());
    for (Eigen::Index k = 0; k < E.cols(); ++k) cy_inv_e.col(k) = conjugate_gradient(apply, E.col(k), options);
    fill_solution_mse(model, E, cy_inv_e, sol);
  }
  return sol;
}

}  // namespace linprobit
