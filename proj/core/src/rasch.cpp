#include "linprobit/rasch.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "linprobit/errors.hpp"
#include "linprobit/specfun.hpp"

namespace linprobit {

namespace {

constexpr double kTwoOverPi = 2.0 / std::numbers::pi;

void check_dimensions(const RaschDesign& design, const ResponseSet& observed) {
  if (observed.num_users() != design.users || observed.num_items() != design.items)
    throw DimensionError("response set is " + std::to_string(observed.num_users()) + " x " +
                         std::to_string(observed.num_items()) + " but the design is " +
                         std::to_string(design.users) + " x " + std::to_string(design.items));
}

Vector prior_variances(const RaschDesign& design) {
  Vector v(design.num_parameters());
  v.head(design.users).setConstant(design.sigma2_ability);
  v.tail(design.items).setConstant(design.sigma2_difficulty);
  return v;
}

// Factored form of the per-user MSE; numerically safer than going through r.
double closed_form_ability(double users, double items, double sigma2) {
  if (sigma2 == 0.0) return 0.0;
  const double t = sigma2 / (2.0 * sigma2 + 1.0);
  const double s = kTwoOverPi * std::asin(t);
  const double ratio = items * (s * (items + users - 3.0) + 1.0) /
                       ((s * (items - 2.0) + 1.0) * (s * (items + users - 2.0) + 1.0));
  return sigma2 * (1.0 - kTwoOverPi * t * ratio);
}

constexpr double kSaturatedMean = 1.0 - 1e-16;

}  // namespace

void RaschDesign::validate() const {
  if (users < 1 || items < 1) throw DomainError("a Rasch design needs at least one user and one item");
  if (!(sigma2_ability > 0.0) || !(sigma2_difficulty > 0.0) || !std::isfinite(sigma2_ability) ||
      !std::isfinite(sigma2_difficulty))
    throw DomainError("Rasch prior variances must be finite and positive");
}

GeneralProbitModel rasch_design_matrix(const RaschDesign& design, const ResponseSet* observed) {
  design.validate();
  const int U = design.users;
  const int Q = design.items;
  Matrix D;
  if (observed) {
    check_dimensions(design, *observed);
    if (observed->empty()) throw DataError("response set is empty");
    D = Matrix::Zero(static_cast<Eigen::Index>(observed->size()), U + Q);
    Eigen::Index row = 0;
    for (const Observation& o : observed->observations()) {
      D(row, o.user) = 1.0;
      D(row, U + o.item) = 1.0;
      ++row;
    }
  } else {
    D = Matrix::Zero(static_cast<Eigen::Index>(U) * Q, U + Q);
    for (int i = 0; i < Q; ++i)
      for (int u = 0; u < U; ++u) {
        const Eigen::Index row = static_cast<Eigen::Index>(i) * U + u;
        D(row, u) = 1.0;
        D(row, U + i) = 1.0;
      }
  }
  const Eigen::Index m = D.rows();
  return GeneralProbitModel(std::move(D), Vector::Zero(m), Vector::Zero(U + Q),
                            Matrix(prior_variances(design).asDiagonal()));
}

SparseProbitModel rasch_sparse_model(const RaschDesign& design, const ResponseSet& observed) {
  design.validate();
  check_dimensions(design, observed);
  if (observed.empty()) throw DataError("response set is empty");
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * observed.size());
  int row = 0;
  for (const Observation& o : observed.observations()) {
    triplets.emplace_back(row, o.user, 1.0);
    triplets.emplace_back(row, design.users + o.item, 1.0);
    ++row;
  }
  SparseMatrix D(row, design.num_parameters());
  D.setFromTriplets(triplets.begin(), triplets.end());
  return SparseProbitModel(std::move(D), Vector::Zero(row), Vector::Zero(design.num_parameters()),
                           prior_variances(design));
}

Vector response_vector(const ResponseSet& observed) {
  Vector y(static_cast<Eigen::Index>(observed.size()));
  Eigen::Index k = 0;
  for (const Observation& o : observed.observations()) y[k++] = o.response;
  return y;
}

Vector response_vector(const Eigen::MatrixXi& responses) {
  const Eigen::Index U = responses.rows();
  const Eigen::Index Q = responses.cols();
  Vector y(U * Q);
  for (Eigen::Index i = 0; i < Q; ++i)
    for (Eigen::Index u = 0; u < U; ++u) {
      const int v = responses(u, i);
      if (v != 1 && v != -1) throw DomainError("responses must be +1 or -1");
      y[i * U + u] = v;
    }
  return y;
}

RaschEstimates split_estimate(const Vector& stacked, int users) {
  if (users < 0 || users > stacked.size()) throw DimensionError("user count exceeds the estimate length");
  return {stacked.head(users), -stacked.tail(stacked.size() - users)};
}

double rasch_s(double sigma2) {
  if (!(sigma2 >= 0.0)) throw DomainError("variance must be nonnegative");
  if (std::isinf(sigma2)) return 1.0 / 3.0;
  return kTwoOverPi * std::asin(sigma2 / (2.0 * sigma2 + 1.0));
}

RaschMse rasch_closed_form_mse(int users, int items, double sigma2) {
  if (users < 1 || items < 1) throw DomainError("a Rasch design needs at least one user and one item");
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw DomainError("variance must be finite and nonnegative");
  return {closed_form_ability(users, items, sigma2), closed_form_ability(items, users, sigma2)};
}

RaschMse rasch_closed_form_mse(const RaschDesign& design) {
  design.validate();
  if (!design.equal_variances())
    throw DomainError("the closed-form Rasch MSE requires equal ability and difficulty variances");
  return rasch_closed_form_mse(design.users, design.items, design.sigma2_ability);
}

RaschMseReport rasch_mse(const RaschDesign& design) {
  design.validate();
  if (design.equal_variances()) return {rasch_closed_form_mse(design), true};
  const PredictedMse p = lmmse_predicted_mse(rasch_design_matrix(design));
  return {{p.per_component.head(design.users).mean(), p.per_component.tail(design.items).mean()}, false};
}

double rasch_asymptotic_mse(double sigma2) {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw DomainError("variance must be finite and nonnegative");
  if (sigma2 == 0.0) return 0.0;
  const double t = sigma2 / (2.0 * sigma2 + 1.0);
  return sigma2 * (1.0 - t / std::asin(t));
}

// ---------------------------------------------------------------------------

Vector StructuredCyInverse::apply(const Vector& v) const {
  const Eigen::Index U = users;
  const Eigen::Index Q = items;
  if (v.size() != U * Q) throw DimensionError("vector length must equal U * Q");
  const Eigen::Map<const Matrix> V(v.data(), U, Q);  // column i = item i
  const Vector row_sum = V.rowwise().sum();          // sum over items, per user
  const double total = row_sum.sum();
  const Eigen::RowVectorXd col_sum = V.colwise().sum();

  // q_i = A (sum_j v_j) + B v_i
  Vector out(U * Q);
  Eigen::Map<Matrix> Out(out.data(), U, Q);
  const Vector a_part = (c - d) * row_sum + Vector::Constant(U, d * total);
  for (Eigen::Index i = 0; i < Q; ++i)
    Out.col(i) = a_part + (a - c - b + d) * V.col(i) + Vector::Constant(U, (b - d) * col_sum[i]);
  return out;
}

Matrix StructuredCyInverse::dense() const {
  const Eigen::Index U = users;
  const Eigen::Index Q = items;
  Matrix out(U * Q, U * Q);
  for (Eigen::Index i = 0; i < Q; ++i)
    for (Eigen::Index u = 0; u < U; ++u)
      for (Eigen::Index j = 0; j < Q; ++j)
        for (Eigen::Index v = 0; v < U; ++v) {
          double value;
          if (i == j) value = u == v ? a : b;
          else value = u == v ? c : d;
          out(i * U + u, j * U + v) = value;
        }
  return out;
}

std::array<double, 4> StructuredCyInverse::equation_residuals() const {
  const double U = users;
  const double Q = items;
  return {a + (U - 1) * s * b + (Q - 1) * s * c - 1.0,
          s * a + ((U - 2) * s + 1) * b + (Q - 1) * s * d,
          s * a + ((Q - 2) * s + 1) * c + (U - 1) * s * d,
          s * b + s * c + ((U + Q - 4) * s + 1) * d};
}

StructuredCyInverse structured_cy_inverse(int users, int items, double sigma2) {
  if (users < 1 || items < 1) throw DomainError("a Rasch design needs at least one user and one item");
  const double s = rasch_s(sigma2);
  const double U = users;
  const double Q = items;
  const double s2 = s * s;
  const double s3 = s2 * s;

  StructuredCyInverse inv;
  inv.users = users;
  inv.items = items;
  inv.s = s;
  inv.r = (2 * s - 1) * ((U - 2) * s + 1) * ((Q - 2) * s + 1) * ((Q + U - 2) * s + 1);
  if (inv.r == 0.0 || !std::isfinite(inv.r))
    throw DomainError("structured inverse denominator vanishes for this configuration");
  inv.a = ((3 * U * U + 3 * Q * Q - U * U * Q - U * Q * Q + 8 * U * Q - 15 * U - 15 * Q + 20) * s3 +
           (-U * U - Q * Q - 3 * U * Q + 11 * U + 11 * Q - 22) * s2 + (-2 * U - 2 * Q + 8) * s - 1) /
          inv.r;
  inv.b = ((U * Q + Q * Q - 3 * U - 5 * Q + 8) * s3 + (U + 2 * Q - 6) * s2 + s) / inv.r;
  inv.c = ((U * Q + U * U - 5 * U - 3 * Q + 8) * s3 + (2 * U + Q - 6) * s2 + s) / inv.r;
  inv.d = (-(U + Q - 4) * s3 - 2 * s2) / inv.r;
  return inv;
}

StructuredCyInverse structured_cy_inverse(const RaschDesign& design) {
  design.validate();
  if (!design.equal_variances())
    throw DomainError("the structured inverse requires equal ability and difficulty variances");
  return structured_cy_inverse(design.users, design.items, design.sigma2_ability);
}

LmmseSolution rasch_fast_lmmse_fit(const RaschDesign& design, const Eigen::MatrixXi& responses) {
  const StructuredCyInverse inv = structured_cy_inverse(design);
  const Eigen::Index U = design.users;
  const Eigen::Index Q = design.items;
  if (responses.rows() != U || responses.cols() != Q) throw DimensionError("response matrix must be U x Q");

  const double sigma2 = design.sigma2_ability;
  const double kappa = std::sqrt(kTwoOverPi) * sigma2 / std::sqrt(2.0 * sigma2 + 1.0);
  const Vector q = inv.apply(response_vector(responses));
  const Eigen::Map<const Matrix> Qm(q.data(), U, Q);

  LmmseSolution sol;
  sol.path = SolvePath::structured_kronecker;
  sol.estimate.resize(U + Q);
  sol.estimate.head(U) = kappa * Qm.rowwise().sum();
  sol.estimate.tail(Q) = kappa * Qm.colwise().sum().transpose();
  sol.offset = Vector::Zero(U + Q);

  const RaschMse mse = rasch_closed_form_mse(design);
  sol.per_component_mse.resize(U + Q);
  sol.per_component_mse.head(U).setConstant(mse.ability);
  sol.per_component_mse.tail(Q).setConstant(mse.difficulty);
  sol.predicted_mse = static_cast<double>(U) * mse.ability + static_cast<double>(Q) * mse.difficulty;
  return sol;
}

LmmseSolution rasch_lmmse_fit(const RaschDesign& design, const ResponseSet& observed,
                              const RaschCgOptions& options) {
  design.validate();
  check_dimensions(design, observed);
  const int U = design.users;
  const int Q = design.items;
  const auto& obs = observed.observations();
  const auto M = static_cast<Eigen::Index>(obs.size());

  // Every observed pair has C_z diagonal sa + sd + 1; pairs sharing a user
  // have covariance sa, pairs sharing an item sd, all others 0.
  const double sa = design.sigma2_ability;
  const double sd = design.sigma2_difficulty;
  const double var_z = sa + sd + 1.0;
  const double s_user = kTwoOverPi * std::asin(sa / var_z);
  const double s_item = kTwoOverPi * std::asin(sd / var_z);
  const double kappa_a = std::sqrt(kTwoOverPi) * sa / std::sqrt(var_z);
  const double kappa_d = std::sqrt(kTwoOverPi) * sd / std::sqrt(var_z);

  auto apply = [&](const Vector& v) -> Vector {
    Vector user_sum = Vector::Zero(U);
    Vector item_sum = Vector::Zero(Q);
    for (Eigen::Index k = 0; k < M; ++k) {
      user_sum[obs[k].user] += v[k];
      item_sum[obs[k].item] += v[k];
    }
    Vector out(M);
    for (Eigen::Index k = 0; k < M; ++k)
      out[k] = v[k] + s_user * (user_sum[obs[k].user] - v[k]) + s_item * (item_sum[obs[k].item] - v[k]);
    return out;
  };
  // E^T v: column u of E is kappa_a on the rows of user u, column U+i is
  // kappa_d on the rows of item i.
  auto apply_et = [&](const Vector& v) -> Vector {
    Vector out = Vector::Zero(U + Q);
    for (Eigen::Index k = 0; k < M; ++k) {
      out[obs[k].user] += kappa_a * v[k];
      out[U + obs[k].item] += kappa_d * v[k];
    }
    return out;
  };

  LmmseSolution sol;
  sol.path = SolvePath::matrix_free_cg;
  sol.offset = Vector::Zero(U + Q);
  if (M == 0) {
    sol.estimate = Vector::Zero(U + Q);
  } else {
    sol.estimate = apply_et(conjugate_gradient(apply, response_vector(observed), options.cg));
  }

  if (options.with_mse) {
    sol.per_component_mse.resize(U + Q);
    for (int k = 0; k < U + Q; ++k) {
      const bool is_user = k < U;
      Vector e = Vector::Zero(M);
      for (Eigen::Index j = 0; j < M; ++j)
        if (is_user ? obs[j].user == k : obs[j].item == k - U) e[j] = is_user ? kappa_a : kappa_d;
      const double prior = is_user ? sa : sd;
      sol.per_component_mse[k] = M == 0 ? prior : prior - e.dot(conjugate_gradient(apply, e, options.cg));
    }
    sol.predicted_mse = sol.per_component_mse.sum();
  }
  return sol;
}

// ---------------------------------------------------------------------------

KnownDifficultyEstimator::KnownDifficultyEstimator(const KnownDifficultyModel& model) {
  const Eigen::Index Q = model.difficulties.size();
  if (Q < 1) throw DimensionError("at least one item difficulty is required");
  if (!(model.sigma2 > 0.0) || !std::isfinite(model.sigma2)) throw DomainError("ability variance must be positive");
  if (!model.difficulties.allFinite() || !std::isfinite(model.prior_mean))
    throw DomainError("difficulties and prior mean must be finite");

  const double var_z = model.sigma2 + 1.0;
  const double sd_z = std::sqrt(var_z);
  const Correlation rho(model.sigma2 / var_z);

  Vector c(Q), y_mean(Q), e(Q);
  std::vector<char> saturated(Q, 0);
  for (Eigen::Index i = 0; i < Q; ++i) {
    c[i] = (model.prior_mean - model.difficulties[i]) / sd_z;
    e[i] = 2.0 * (model.sigma2 / sd_z) * norm_pdf(c[i]);
    if (std::abs(c[i]) > kSaturationThreshold) {
      saturated[i] = 1;
      y_mean[i] = std::copysign(kSaturatedMean, c[i]);
    } else {
      y_mean[i] = std::erf(c[i] / std::numbers::sqrt2);
    }
  }

  Matrix cy(Q, Q);
  for (Eigen::Index i = 0; i < Q; ++i) {
    cy(i, i) = 1.0 - y_mean[i] * y_mean[i];
    for (Eigen::Index j = i + 1; j < Q; ++j) {
      const double v = saturated[i] || saturated[j]
                           ? 0.0
                           : 2.0 * (binorm_cdf(c[i], c[j], rho) + binorm_cdf(-c[i], -c[j], rho)) - 1.0 -
                                 y_mean[i] * y_mean[j];
      cy(i, j) = v;
      cy(j, i) = v;
    }
  }

  const CovarianceFactor factor(cy);
  weights_ = factor.solve(e);
  jitter_ = factor.jitter();
  offset_ = model.prior_mean - weights_.dot(y_mean);
  predicted_mse_ = model.sigma2 - e.dot(weights_);
}

double KnownDifficultyEstimator::estimate(const Vector& y) const {
  if (y.size() != weights_.size()) throw DimensionError("response vector length must equal the number of items");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 1.0 && y[i] != -1.0) throw DomainError("observations must be +1 or -1");
  return weights_.dot(y) + offset_;
}

KnownDifficultyFit known_difficulty_fit(const KnownDifficultyModel& model, const Vector& y) {
  const KnownDifficultyEstimator est(model);
  return {est.estimate(y), est.predicted_mse()};
}

}  // namespace linprobit
