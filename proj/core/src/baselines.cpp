#include "linprobit/baselines.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "linprobit/errors.hpp"
#include "linprobit/random.hpp"
#include "linprobit/specfun.hpp"

namespace linprobit {

namespace {

// Common sparse representation used by every baseline.
struct Problem {
  SparseMatrix design;
  Vector bias;
  Vector mean;
  SparseMatrix precision;  // C_x^{-1}
};

Problem make_problem(const GeneralProbitModel& model) {
  Problem p{model.design().sparseView(), model.bias(), model.prior_mean(), {}};
  if (model.has_diagonal_prior()) {
    const Vector inv = model.prior_cov().diagonal().cwiseInverse();
    p.precision = Matrix(inv.asDiagonal()).sparseView();
  } else {
    p.precision = model.prior_precision().sparseView();
  }
  return p;
}

Problem make_problem(const SparseProbitModel& model) {
  Problem p{model.design(), model.bias(), model.prior_mean(), {}};
  const Eigen::Index n = model.num_parameters();
  p.precision.resize(n, n);
  std::vector<Eigen::Triplet<double>> diag;
  diag.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) diag.emplace_back(k, k, 1.0 / model.prior_variance()[k]);
  p.precision.setFromTriplets(diag.begin(), diag.end());
  return p;
}

void check_y(const Problem& p, const Vector& y) {
  if (y.size() != p.design.rows()) throw DimensionError("observation vector length must equal M");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 1.0 && y[i] != -1.0) throw DomainError("observations must be +1 or -1");
}

// ---------------------------------------------------------------------------
// MAP

struct LinkTerms {
  double loss;
  double d1;  // d loss / dt
  double d2;  // d^2 loss / dt^2
};

LinkTerms link_terms(Link link, double t) {
  if (link == Link::probit) {
    const double lambda = inv_mills(t);
    return {-log_norm_cdf(t), -lambda, lambda * (lambda + t)};
  }
  const double loss = t > 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
  const double sig_neg = 1.0 / (1.0 + std::exp(t));  // sigmoid(-t)
  return {loss, -sig_neg, sig_neg * (1.0 - sig_neg)};
}

struct Evaluation {
  double objective = 0.0;
  Vector gradient;
  Vector curvature;  // per observation
};

double objective_only(const Problem& p, const Vector& y, const Vector& x, const MapConfig& config) {
  const Vector t = (p.design * x + p.bias).cwiseProduct(y);
  double f = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) f += link_terms(config.link, t[i]).loss;
  if (config.use_prior) {
    const Vector dx = x - p.mean;
    f += 0.5 * dx.dot(p.precision * dx);
  }
  return f;
}

Evaluation evaluate(const Problem& p, const Vector& y, const Vector& x, const MapConfig& config) {
  const Vector t = (p.design * x + p.bias).cwiseProduct(y);
  Evaluation ev;
  Vector g_obs(t.size());
  ev.curvature.resize(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const LinkTerms lt = link_terms(config.link, t[i]);
    ev.objective += lt.loss;
    g_obs[i] = y[i] * lt.d1;
    ev.curvature[i] = lt.d2;
  }
  ev.gradient = p.design.transpose() * g_obs;
  if (config.use_prior) {
    const Vector dx = x - p.mean;
    const Vector pdx = p.precision * dx;
    ev.objective += 0.5 * dx.dot(pdx);
    ev.gradient += pdx;
  }
  return ev;
}

constexpr Eigen::Index kDenseNewtonLimit = 1000;

// Jacobi-preconditioned CG; returns the best iterate even without full
// convergence (inexact Newton).
template <class Apply>
Vector preconditioned_cg(Apply&& apply, const Vector& rhs, const Vector& diag, double rel_tol, int max_iter) {
  Vector x = Vector::Zero(rhs.size());
  Vector r = rhs;
  Vector zv = r.cwiseQuotient(diag);
  Vector p = zv;
  double rz = r.dot(zv);
  const double target = rel_tol * rhs.norm();
  for (int it = 0; it < max_iter && r.norm() > target; ++it) {
    const Vector ap = apply(p);
    const double alpha = rz / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    zv = r.cwiseQuotient(diag);
    const double rz_next = r.dot(zv);
    p = zv + (rz_next / rz) * p;
    rz = rz_next;
  }
  return x;
}

Vector newton_direction(const Problem& p, const Evaluation& ev, const MapConfig& config) {
  const Eigen::Index n = p.design.cols();
  if (n <= kDenseNewtonLimit) {
    const SparseMatrix weighted = ev.curvature.asDiagonal() * p.design;
    Matrix H = Matrix(p.design.transpose() * weighted);
    if (config.use_prior) H += Matrix(p.precision);
    const Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success)
      throw ConvergenceError("MAP Hessian is singular; the problem is not identifiable without a prior");
    return -llt.solve(ev.gradient);
  }
  Vector diag = ev.curvature.transpose() * p.design.cwiseAbs2();
  if (config.use_prior) diag += p.precision.diagonal();
  diag = diag.cwiseMax(1e-300);
  auto apply = [&](const Vector& v) -> Vector {
    Vector out = p.design.transpose() * ev.curvature.cwiseProduct(p.design * v);
    if (config.use_prior) out += p.precision * v;
    return out;
  };
  return -preconditioned_cg(apply, ev.gradient, diag, 1e-10, 2000);
}

MapResult map_fit_problem(const Problem& p, const Vector& y, const MapConfig& config) {
  check_y(p, y);
  if (config.max_iterations < 1) throw DomainError("max_iterations must be positive");
  if (!(config.gradient_tolerance > 0.0)) throw DomainError("gradient tolerance must be positive");

  MapResult result;
  Vector x = p.mean;
  constexpr double armijo = 1e-4;
  constexpr double divergence_norm = 1e3;
  auto diverged = [] {
    return ConvergenceError("maximum-likelihood estimate diverges (parameter norm above 1e3); data may be separable");
  };
  for (int it = 0;; ++it) {
    const Evaluation ev = evaluate(p, y, x, config);
    result.objective_trace.push_back(ev.objective);
    result.gradient_norm = ev.gradient.norm();
    result.iterations = it;
    if (!config.use_prior && x.norm() > divergence_norm) throw diverged();
    const bool small_gradient = result.gradient_norm <= config.gradient_tolerance;
    // With a prior the objective is strongly convex and a small gradient
    // suffices. Without one, the likelihood of separable data flattens out
    // toward infinity, so a stationary point must also have a short Newton step.
    if (small_gradient && config.use_prior) break;
    if (it == config.max_iterations)
      throw ConvergenceError("MAP did not converge within " + std::to_string(config.max_iterations) +
                             " iterations (gradient norm " + std::to_string(result.gradient_norm) + ")");

    const Vector step = newton_direction(p, ev, config);
    if (small_gradient && step.norm() <= 1e-6 * std::max(1.0, x.norm())) break;
    const double slope = ev.gradient.dot(step);
    // Absorb rounding in the objective near the optimum.
    const double slack = 1e-14 * std::max(1.0, std::abs(ev.objective));
    double alpha = 1.0;
    bool accepted = false;
    double f_accepted = 0.0;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      f_accepted = objective_only(p, y, x + alpha * step, config);
      if (f_accepted <= ev.objective + armijo * alpha * slope + slack) {
        accepted = true;
        break;
      }
    }
    if (!accepted) throw ConvergenceError("MAP line search failed to decrease the objective");
    if (!config.use_prior && alpha == 1.0) {
      // Follow the direction while the likelihood keeps improving; on
      // separable data this walks out to the divergence radius quickly.
      for (int grow = 0; grow < 60; ++grow) {
        const double f_next = objective_only(p, y, x + 2.0 * alpha * step, config);
        if (!(f_next <= f_accepted) || f_next == ev.objective) break;
        alpha *= 2.0;
        f_accepted = f_next;
        if ((x + alpha * step).norm() > divergence_norm) throw diverged();
      }
    }
    x += alpha * step;
  }
  result.estimate = std::move(x);
  return result;
}

// ---------------------------------------------------------------------------
// Gibbs

GibbsResult gibbs_problem(const Problem& p, const Vector& y, const GibbsConfig& config) {
  check_y(p, y);
  if (config.burn_in < 0) throw DomainError("burn-in must be nonnegative");
  if (config.samples < 1) throw DomainError("at least one Gibbs sample is required");

  const SparseMatrix Dt = p.design.transpose();
  SparseMatrix precision = Dt * p.design + p.precision;
  precision.makeCompressed();
  const Eigen::SimplicialLLT<SparseMatrix> llt(precision);
  if (llt.info() != Eigen::Success) throw SingularMatrixError("Gibbs posterior precision is not positive definite", 0.0);

  const Eigen::Index m = p.design.rows();
  const Eigen::Index n = p.design.cols();
  const Vector prior_term = p.precision * p.mean;

  Rng rng(config.seed);
  Vector x = p.mean;
  Vector z(m), xi(n), w(n);
  Vector sum_x = Vector::Zero(n);
  Vector sum_z = Vector::Zero(m);
  const int total = config.burn_in + config.samples;
  for (int iter = 0; iter < total; ++iter) {
    const Vector z_mean = p.design * x + p.bias;
    for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.truncated_unit_normal(z_mean[i], y[i] > 0.0);
    for (Eigen::Index k = 0; k < n; ++k) xi[k] = rng.normal();

    // x = P^T L^{-T} (L^{-1} P rhs + xi) with P A P^T = L L^T.
    w = llt.permutationP() * (Dt * (z - p.bias) + prior_term);
    llt.matrixL().solveInPlace(w);
    w += xi;
    llt.matrixU().solveInPlace(w);
    x = llt.permutationPinv() * w;

    if (iter >= config.burn_in) {
      sum_x += x;
      sum_z += z;
    }
  }
  return {sum_x / config.samples, sum_z / config.samples};
}

// ---------------------------------------------------------------------------
// Quadrature posterior mean

// Laplace frame of one posterior p(x) prod_i Phi(s_i t_i); the grid for that
// pattern is x = mode + L u with L L^T the inverse curvature at the mode.
struct PatternFrame {
  Vector mode;
  Matrix L;
  double log_peak = 0.0;   // log of the unnormalized posterior at the mode
  double log_det_L = 0.0;
};

class PosteriorQuadrature {
 public:
  explicit PosteriorQuadrature(const GeneralProbitModel& model)
      : model_(model), precision_(model.prior_precision()) {
    const Matrix L = model.prior_cov_llt().matrixL();
    log_norm_ = -0.5 * static_cast<double>(model.num_parameters()) * std::log(2.0 * std::numbers::pi) -
                L.diagonal().array().log().sum();
  }

  double log_density(const Vector& x, const Vector& signs) const {
    const Vector r = x - model_.prior_mean();
    double v = log_norm_ - 0.5 * r.dot(precision_ * r);
    const Vector t = model_.design() * x + model_.bias();
    for (Eigen::Index i = 0; i < t.size(); ++i) v += log_norm_cdf(signs[i] * t[i]);
    return v;
  }

  PatternFrame frame(const Vector& signs, const Vector& start) const {
    const Matrix& D = model_.design();
    const Eigen::Index n = model_.num_parameters();
    Vector x = start;
    double f = log_density(x, signs);
    Matrix H(n, n);
    for (int it = 0; it < 200; ++it) {
      const Vector t = D * x + model_.bias();
      Vector g = -precision_ * (x - model_.prior_mean());
      H = precision_;
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double z = signs[i] * t[i];
        const double r = inv_mills(z);
        g += signs[i] * r * D.row(i).transpose();
        H += r * (z + r) * D.row(i).transpose() * D.row(i);
      }
      const Vector step = H.llt().solve(g);
      double alpha = 1.0;
      double f_next = log_density(x + step, signs);
      while (f_next < f && alpha > 1e-12) {
        alpha *= 0.5;
        f_next = log_density(x + alpha * step, signs);
      }
      x += alpha * step;
      const bool done = (alpha * step).norm() <= 1e-13 * std::max(1.0, x.norm()) || f_next - f <= 0.0;
      f = f_next;
      if (done) break;
    }
    // curvature at the final point
    const Vector t = D * x + model_.bias();
    H = precision_;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double z = signs[i] * t[i];
      const double r = inv_mills(z);
      H += r * (z + r) * D.row(i).transpose() * D.row(i);
    }
    PatternFrame fr;
    fr.mode = x;
    const Eigen::LLT<Matrix> llt(H.inverse());
    fr.L = llt.matrixL();
    fr.log_peak = f;
    fr.log_det_L = fr.L.diagonal().array().log().sum();
    return fr;
  }

  // Trapezoid sums of p(x) prod Phi(s_i t_i) [1, x] over the lattice
  // u in h (Z + offset)^n, relative to the density at the mode. The integrand is log-concave, so
  // along every lattice line (and for the slice maxima of outer coordinates)
  // it is unimodal: each scan stops once it is past the peak and below
  // e^-kCutoff.
  std::pair<double, Vector> moments(const PatternFrame& fr, const Vector& signs, double h, double offset,
                                    double cutoff = 38.0) const {
    constexpr int kMaxSteps = 4000;
    const Eigen::Index n = model_.num_parameters();
    const Eigen::Index m = model_.num_observations();
    // t = t0 + (D L) u and (x - mu)^T P (x - mu) = q0 + 2 q1^T u + u^T Q2 u
    const Vector t0 = model_.design() * fr.mode + model_.bias();
    const Matrix DL = model_.design() * fr.L;
    const Vector r0 = fr.mode - model_.prior_mean();
    const Vector q1 = fr.L.transpose() * (precision_ * r0);
    const Matrix Q2 = fr.L.transpose() * precision_ * fr.L;
    const double base = log_norm_ - 0.5 * r0.dot(precision_ * r0) - fr.log_peak;

    Vector u = Vector::Zero(n);
    double s0 = 0.0;
    Vector s1u = Vector::Zero(n);
    auto log_f = [&]() {
      double v = base;
      for (Eigen::Index k = 0; k < n; ++k) {
        double row = 2.0 * q1[k];
        for (Eigen::Index l = 0; l < n; ++l) row += Q2(k, l) * u[l];
        v -= 0.5 * row * u[k];
      }
      // one log per point; log space only if the product underflows
      double prod = 1.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        double t = t0[i];
        for (Eigen::Index k = 0; k < n; ++k) t += DL(i, k) * u[k];
        prod *= norm_cdf(signs[i] * t);
      }
      if (prod > 1e-280) return v + std::log(prod);
      for (Eigen::Index i = 0; i < m; ++i) {
        double t = t0[i];
        for (Eigen::Index k = 0; k < n; ++k) t += DL(i, k) * u[k];
        v += log_norm_cdf(signs[i] * t);
      }
      return v;
    };
    // Sums the slice with coordinates >= dim free; returns its largest log value.
    auto scan = [&](auto&& self, Eigen::Index dim) -> double {
      double best = -std::numeric_limits<double>::infinity();
      for (int dir : {1, -1}) {
        double prev = -std::numeric_limits<double>::infinity();
        for (int j = dir > 0 ? 0 : -1, steps = 0; steps < kMaxSteps; j += dir, ++steps) {
          u[dim] = (j + offset) * h;
          double v;
          if (dim == 0) {
            v = log_f();
            const double w = std::exp(v);
            s0 += w;
            s1u += w * u;
          } else {
            v = self(self, dim - 1);
          }
          best = std::max(best, v);
          if (v < -cutoff && v <= prev) break;
          prev = v;
        }
      }
      u[dim] = 0.0;
      return best;
    };
    scan(scan, n - 1);
    return {s0, s0 * fr.mode + fr.L * s1u};
  }

 private:
  const GeneralProbitModel& model_;
  Matrix precision_;
  double log_norm_ = 0.0;
};

struct QuadratureResult {
  Vector estimate;
  std::optional<double> mse;
};

}  // namespace

// ---------------------------------------------------------------------------

MapResult map_fit(const GeneralProbitModel& model, const Vector& y, const MapConfig& config) {
  return map_fit_problem(make_problem(model), y, config);
}

MapResult map_fit(const SparseProbitModel& model, const Vector& y, const MapConfig& config) {
  return map_fit_problem(make_problem(model), y, config);
}

double map_objective(const GeneralProbitModel& model, const Vector& y, const Vector& x, const MapConfig& config) {
  const Problem p = make_problem(model);
  check_y(p, y);
  if (x.size() != model.num_parameters()) throw DimensionError("parameter vector length must equal N");
  return objective_only(p, y, x, config);
}

Vector map_gradient(const GeneralProbitModel& model, const Vector& y, const Vector& x, const MapConfig& config) {
  const Problem p = make_problem(model);
  check_y(p, y);
  if (x.size() != model.num_parameters()) throw DimensionError("parameter vector length must equal N");
  return evaluate(p, y, x, config).gradient;
}

GibbsResult pm_gibbs(const GeneralProbitModel& model, const Vector& y, const GibbsConfig& config) {
  return gibbs_problem(make_problem(model), y, config);
}

GibbsResult pm_gibbs(const SparseProbitModel& model, const Vector& y, const GibbsConfig& config) {
  return gibbs_problem(make_problem(model), y, config);
}

ExactPosteriorMean pm_exact(const GeneralProbitModel& model, const Vector& y, bool with_mse) {
  check_binary_observations(model, y);
  const Eigen::Index n = model.num_parameters();
  const Eigen::Index m = model.num_observations();
  if (n > kPmExactMaxParameters)
    throw DimensionError("quadrature posterior mean supports at most " + std::to_string(kPmExactMaxParameters) +
                         " parameters, got " + std::to_string(n));
  if (with_mse && m > kPmExactMaxObservationsForMse)
    throw DimensionError("exact posterior-mean MSE supports at most " +
                         std::to_string(kPmExactMaxObservationsForMse) + " observations, got " + std::to_string(m));

  constexpr double kTolerance = 1e-8;
  // Lattice points per posterior standard deviation at each level. A level is
  // accepted when the lattice and its copy shifted by half a cell agree; the
  // leading aliasing errors of the two have opposite signs.
  static constexpr int kDensities[] = {1, 2, 3, 4, 6, 8, 12};

  const PosteriorQuadrature quad(model);
  const PatternFrame observed = quad.frame(y, model.prior_mean());
  // With zero bias and prior mean, pattern -s mirrors s: same probability,
  // negated conditional mean. Only half the patterns are integrated then.
  const bool mirrored = m > 0 && model.bias().isZero(0.0) && model.prior_mean().isZero(0.0);
  std::vector<Vector> patterns;
  std::vector<PatternFrame> frames;
  std::vector<double> cutoffs;
  if (with_mse) {
    const std::size_t count = std::size_t{1} << (mirrored ? m - 1 : m);
    patterns.reserve(count);
    frames.reserve(count);
    for (std::size_t bits = 0; bits < count; ++bits) {
      Vector s(m);
      for (Eigen::Index i = 0; i < m; ++i) s[i] = (bits >> i) & 1U ? 1.0 : -1.0;
      frames.push_back(quad.frame(s, model.prior_mean()));
      patterns.push_back(std::move(s));
      // A pattern of probability p only needs relative accuracy e^-38 / p.
      const PatternFrame& fr = frames.back();
      const double log_p = fr.log_peak + fr.log_det_L + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
      cutoffs.push_back(std::clamp(38.0 + log_p, 10.0, 38.0));
    }
  }
  const double total_moment = model.prior_mean().squaredNorm() + model.prior_cov().trace();

  auto evaluate = [&](double h, double offset) {
    const double log_cell = static_cast<double>(n) * std::log(h);
    QuadratureResult cur;
    const auto [s0, s1] = quad.moments(observed, y, h, offset);
    if (!(s0 > 0.0) || !std::isfinite(observed.log_peak))
      throw DomainError("observations have zero probability under the model");
    cur.estimate = s1 / s0;
    if (with_mse) {
      double explained = 0.0;
      for (std::size_t k = 0; k < patterns.size(); ++k) {
        const auto [p0, p1] = quad.moments(frames[k], patterns[k], h, offset, cutoffs[k]);
        if (p0 > 0.0)
          explained += std::exp(frames[k].log_peak + frames[k].log_det_L + log_cell) * p1.squaredNorm() / p0;
      }
      if (mirrored) explained *= 2.0;
      cur.mse = total_moment - explained;
    }
    return cur;
  };

  double change = 0.0;
  for (int density : kDensities) {
    const double h = 1.0 / density;
    const QuadratureResult a = evaluate(h, 0.0);
    const QuadratureResult b = evaluate(h, 0.5);
    const Vector estimate = 0.5 * (a.estimate + b.estimate);
    const double scale = std::max(1.0, estimate.cwiseAbs().maxCoeff());
    change = (a.estimate - b.estimate).cwiseAbs().maxCoeff() / scale;
    std::optional<double> mse;
    if (with_mse) {
      mse = 0.5 * (*a.mse + *b.mse);
      change = std::max(change, std::abs(*a.mse - *b.mse) / std::max(1e-300, std::abs(*mse)));
    }
    if (change <= kTolerance) return {estimate, mse, density};
  }
  throw ConvergenceError("posterior-mean quadrature did not reach 1e-8 relative accuracy (last change " +
                         std::to_string(change) + ")");
}

double probit_information(double t) noexcept {
  return std::exp(2.0 * log_norm_pdf(t) - log_norm_cdf(t) - log_norm_cdf(-t));
}

namespace {

FisherBound fisher_problem(const Problem& p, const Vector& theta, FisherVariant variant) {
  const Eigen::Index n = p.design.cols();
  if (theta.size() != n) throw DimensionError("evaluation point length must equal N");
  const Vector t = p.design * theta + p.bias;
  Vector lambda(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) lambda[i] = probit_information(t[i]);
  const SparseMatrix weighted = lambda.asDiagonal() * p.design;
  Matrix info = Matrix(p.design.transpose() * weighted);
  if (variant == FisherVariant::bayesian) info += Matrix(p.precision);
  const Eigen::LLT<Matrix> llt(info);
  const Vector pivots = Matrix(llt.matrixL()).diagonal().cwiseAbs2();
  if (llt.info() != Eigen::Success || pivots.minCoeff() <= 1e-12 * pivots.maxCoeff())
    throw SingularMatrixError("Fisher information matrix is singular", 0.0);
  const Matrix inv = llt.solve(Matrix::Identity(n, n));
  return {inv.diagonal(), theta};
}

}  // namespace

FisherBound fisher_lower_bound(const GeneralProbitModel& model, const Vector& theta, FisherVariant variant) {
  return fisher_problem(make_problem(model), theta, variant);
}

FisherBound fisher_lower_bound(const SparseProbitModel& model, const Vector& theta, FisherVariant variant) {
  return fisher_problem(make_problem(model), theta, variant);
}

}  // namespace linprobit
