#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "linprobit/baselines.hpp"
#include "linprobit/errors.hpp"
#include "linprobit/rasch.hpp"
#include "oracles.hpp"

using namespace linprobit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;

GeneralProbitModel random_model(oracle::Fixture& fx, int m, int n, bool with_mean) {
  VectorXd bias = VectorXd::Zero(m);
  VectorXd mean = VectorXd::Zero(n);
  if (with_mean) {
    for (int i = 0; i < m; ++i) bias[i] = fx.uniform(-0.5, 0.5);
    for (int j = 0; j < n; ++j) mean[j] = fx.uniform(-0.5, 0.5);
  }
  return GeneralProbitModel(fx.normal_matrix(m, n), bias, mean, fx.spd(n));
}

// Positive root of x = Q phi(x) / Phi(x) by bisection.
double map_root(int Q) {
  double lo = 0.0, hi = 10.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (Q * oracle::phi(mid) / oracle::Phi(mid) - mid > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("MAP for one all-positive item") {
  for (int Q : {1, 3, 10}) {
    const auto model = GeneralProbitModel::centered(MatrixXd::Ones(Q, 1), MatrixXd::Identity(1, 1));
    const auto fit = map_fit(model, VectorXd::Ones(Q));
    CHECK(fit.estimate[0] == doctest::Approx(map_root(Q)).epsilon(1e-10));
    CHECK(fit.gradient_norm <= 1e-8);
  }
  const auto q1 = GeneralProbitModel::centered(MatrixXd::Ones(1, 1), MatrixXd::Identity(1, 1));
  // gradient tolerance 1e-8 with Hessian >= 1 bounds the error by 1e-8
  CHECK(std::abs(map_fit(q1, VectorXd::Ones(1)).estimate[0] - 0.5060544689891808) <= 1e-8);
}

TEST_CASE("MAP with a zero design returns the prior mean") {
  oracle::Fixture fx(31);
  const VectorXd mean = VectorXd::LinSpaced(3, -1.0, 1.0);
  const GeneralProbitModel model(MatrixXd::Zero(5, 3), VectorXd::Zero(5), mean, fx.spd(3));
  for (Link link : {Link::probit, Link::logit}) {
    MapConfig cfg;
    cfg.link = link;
    CHECK((map_fit(model, fx.signs(5), cfg).estimate - mean).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("MAP gradient matches central differences") {
  oracle::Fixture fx(32);
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = random_model(fx, fx.integer(1, 10), fx.integer(1, 5), trial % 2 == 1);
    const VectorXd y = fx.signs(model.num_observations());
    for (Link link : {Link::probit, Link::logit}) {
      MapConfig cfg;
      cfg.link = link;
      const VectorXd x = fx.normal_matrix(model.num_parameters(), 1);
      const VectorXd g = map_gradient(model, y, x, cfg);
      const double h = 1e-5;
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        VectorXd xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const double fd = (map_objective(model, y, xp, cfg) - map_objective(model, y, xm, cfg)) / (2 * h);
        CHECK(std::abs(fd - g[j]) <= 1e-6);
      }
      const auto fit = map_fit(model, y, cfg);
      CHECK(fit.gradient_norm <= 1e-8);
      CHECK(map_gradient(model, y, fit.estimate, cfg).norm() <= 1e-8);
      for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
        CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1] + 1e-12 * std::max(1.0, std::abs(fit.objective_trace[k - 1])));
    }
  }
}

TEST_CASE("MAP objective is finite far in the tails") {
  const auto model = GeneralProbitModel::centered(MatrixXd::Ones(1, 1), MatrixXd::Identity(1, 1));
  VectorXd x(1);
  x << -60.0;
  const double f = map_objective(model, VectorXd::Ones(1), x);
  CHECK(std::isfinite(f));
  CHECK(std::isfinite(map_gradient(model, VectorXd::Ones(1), x)[0]));
}

TEST_CASE("maximum likelihood diverges on separable data") {
  const auto model = GeneralProbitModel::centered(MatrixXd::Ones(3, 1), MatrixXd::Identity(1, 1));
  MapConfig cfg;
  cfg.use_prior = false;
  CHECK_THROWS_AS(map_fit(model, VectorXd::Ones(3), cfg), ConvergenceError);

  VectorXd y(4);
  y << 1, 1, -1, 1;
  const auto overlapping = GeneralProbitModel::centered(MatrixXd::Ones(4, 1), MatrixXd::Identity(1, 1));
  // ML with three of four positive: Phi(x) = 3/4.
  CHECK(map_fit(overlapping, y, cfg).estimate[0] == doctest::Approx(0.6744897501960817).epsilon(1e-9));
}

TEST_CASE("probit and logit MAP agree in sign") {
  oracle::Fixture fx(33);
  for (int trial = 0; trial < 5; ++trial) {
    const RaschDesign design{8, 10, 1.0, 1.0};
    const auto model = rasch_design_matrix(design);
    const VectorXd y = fx.signs(80);
    const auto probit = map_fit(model, y);
    MapConfig logit_cfg;
    logit_cfg.link = Link::logit;
    const auto logit = map_fit(model, y, logit_cfg);
    for (Eigen::Index j = 0; j < probit.estimate.size(); ++j)
      if (std::abs(probit.estimate[j]) > 1e-9) CHECK(probit.estimate[j] * logit.estimate[j] > 0.0);
  }
}

TEST_CASE("sparse and dense MAP agree") {
  oracle::Fixture fx(34);
  const auto model = rasch_design_matrix({6, 5, 0.5, 2.0});
  const auto sparse = SparseProbitModel::from_general(model);
  const VectorXd y = fx.signs(30);
  CHECK((map_fit(model, y).estimate - map_fit(sparse, y).estimate).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("Gibbs sampler basics") {
  oracle::Fixture fx(35);
  const auto model = random_model(fx, 4, 2, true);
  const VectorXd y = fx.signs(4);
  GibbsConfig cfg{200, 500, 42};
  const auto a = pm_gibbs(model, y, cfg);
  const auto b = pm_gibbs(model, y, cfg);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0);
  cfg.seed = 43;
  CHECK((a.mean - pm_gibbs(model, y, cfg).mean).cwiseAbs().maxCoeff() > 0.0);
  for (Eigen::Index m = 0; m < 4; ++m) CHECK(a.latent_mean[m] * y[m] > 0.0);

  const auto sparse = pm_gibbs(SparseProbitModel::from_general(rasch_design_matrix({2, 2, 1.0, 1.0})),
                               VectorXd::Ones(4), GibbsConfig{100, 300, 1});
  const auto dense = pm_gibbs(rasch_design_matrix({2, 2, 1.0, 1.0}), VectorXd::Ones(4), GibbsConfig{100, 300, 1});
  CHECK((sparse.mean - dense.mean).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(pm_gibbs(model, y, GibbsConfig{0, 0, 1}), DomainError);
}

TEST_CASE("Gibbs with a zero design samples the prior") {
  const VectorXd mean = VectorXd::LinSpaced(2, -0.5, 1.5);
  MatrixXd cov(2, 2);
  cov << 2.0, 0.3, 0.3, 0.5;
  const GeneralProbitModel model(MatrixXd::Zero(3, 2), VectorXd::Zero(3), mean, cov);
  const int samples = 20000;
  const auto res = pm_gibbs(model, VectorXd::Ones(3), GibbsConfig{100, samples, 7});
  for (int j = 0; j < 2; ++j) CHECK(std::abs(res.mean[j] - mean[j]) <= 3.0 * std::sqrt(cov(j, j) / samples));
}

TEST_CASE("Gibbs agrees with quadrature posterior mean") {
  oracle::Fixture fx(36);
  const auto model = random_model(fx, 4, 2, true);
  const VectorXd y = fx.signs(4);
  const auto exact = pm_exact(model, y, false);
  // independent chains give an honest Monte Carlo standard error
  const int chains = 10;
  std::vector<VectorXd> means;
  for (int c = 0; c < chains; ++c)
    means.push_back(pm_gibbs(model, y, GibbsConfig{1000, 5000, static_cast<std::uint64_t>(100 + c)}).mean);
  for (int j = 0; j < 2; ++j) {
    double s = 0.0, s2 = 0.0;
    for (const auto& m : means) {
      s += m[j];
      s2 += m[j] * m[j];
    }
    const double avg = s / chains;
    const double se = std::sqrt((s2 - chains * avg * avg) / (chains - 1) / chains);
    CHECK(std::abs(avg - exact.estimate[j]) <= 3.0 * se);
  }
}

TEST_CASE("quadrature posterior mean") {
  const auto scalar = GeneralProbitModel::centered(MatrixXd::Ones(1, 1), MatrixXd::Identity(1, 1));
  const auto pm = pm_exact(scalar, VectorXd::Ones(1));
  CHECK(pm.estimate[0] == doctest::Approx(oracle::scalar_posterior_mean(0.0, 1.0, 1, 1)).epsilon(1e-8));
  // E[x Phi(x)] / E[Phi(x)] = (1 / (2 sqrt(pi))) / (1/2)
  CHECK(pm.estimate[0] == doctest::Approx(1.0 / std::sqrt(kPi)).epsilon(1e-8));
  CHECK(*pm.mse == doctest::Approx(1.0 - 1.0 / kPi).epsilon(1e-8));

  const GeneralProbitModel shifted(MatrixXd::Ones(3, 1), VectorXd::Zero(3), VectorXd::Constant(1, 0.4),
                                   MatrixXd::Constant(1, 1, 2.0));
  CHECK(pm_exact(shifted, -VectorXd::Ones(3), false).estimate[0] ==
        doctest::Approx(oracle::scalar_posterior_mean(0.4, 2.0, 3, -1)).epsilon(1e-8));

  oracle::Fixture fx(37);
  for (int trial = 0; trial < 20; ++trial) {
    const bool with_mean = trial % 2 == 1;
    const auto model = random_model(fx, fx.integer(1, 10), fx.integer(1, 3), with_mean);
    const VectorXd y = fx.signs(model.num_observations());
    const auto res = pm_exact(model, y);
    REQUIRE(res.mse);
    CHECK(*res.mse <= lmmse_predicted_mse(model).total + 1e-9);
    CHECK(*res.mse >= 0.0);
    if (!with_mean) CHECK((pm_exact(model, -y, false).estimate + res.estimate).cwiseAbs().maxCoeff() <= 1e-10);
  }

  CHECK_THROWS_AS(pm_exact(random_model(fx, 3, 4, false), fx.signs(3)), DimensionError);
  CHECK_THROWS_AS(pm_exact(random_model(fx, 13, 1, false), fx.signs(13)), DimensionError);
  CHECK_NOTHROW(pm_exact(random_model(fx, 13, 1, false), fx.signs(13), false));
}

TEST_CASE("Fisher information bound") {
  CHECK(probit_information(0.0) == doctest::Approx(2.0 / kPi).epsilon(1e-15));
  CHECK(probit_information(3.0) == doctest::Approx(std::pow(oracle::phi(3.0), 2) / (oracle::Phi(3.0) * oracle::Phi(-3.0)))
                                       .epsilon(1e-12));
  CHECK(std::isfinite(probit_information(-40.0)));
  CHECK(probit_information(40.0) == doctest::Approx(probit_information(-40.0)).epsilon(1e-12));

  oracle::Fixture fx(38);
  const MatrixXd cx = fx.spd(3);
  const GeneralProbitModel zero(MatrixXd::Zero(4, 3), VectorXd::Zero(4), VectorXd::Zero(3), cx);
  const auto b0 = fisher_lower_bound(zero, VectorXd::Zero(3));
  CHECK((b0.per_component_bound - cx.diagonal()).cwiseAbs().maxCoeff() <= 1e-12);

  for (int Q : {1, 4, 20}) {
    const double sigma2 = 0.7;
    const GeneralProbitModel kd(MatrixXd::Ones(Q, 1), VectorXd::Zero(Q), VectorXd::Zero(1),
                                MatrixXd::Constant(1, 1, sigma2));
    CHECK(fisher_lower_bound(kd, VectorXd::Zero(1)).per_component_bound[0] ==
          doctest::Approx(1.0 / (Q * 2.0 / kPi + 1.0 / sigma2)).epsilon(1e-13));
  }

  const auto rasch = rasch_design_matrix({3, 4, 1.0, 1.0});
  CHECK_THROWS_AS(fisher_lower_bound(rasch, VectorXd::Zero(7), FisherVariant::frequentist), SingularMatrixError);
  const auto bayes = fisher_lower_bound(rasch, VectorXd::Zero(7));
  CHECK((bayes.per_component_bound.array() > 0.0).all());
  CHECK((bayes.per_component_bound.array() <= 1.0).all());
  const auto sparse = fisher_lower_bound(SparseProbitModel::from_general(rasch), VectorXd::Zero(7));
  CHECK((sparse.per_component_bound - bayes.per_component_bound).cwiseAbs().maxCoeff() <= 1e-12);

  const auto tall = GeneralProbitModel::centered(fx.normal_matrix(6, 2), MatrixXd::Identity(2, 2));
  const VectorXd theta = fx.normal_matrix(2, 1);
  const auto freq = fisher_lower_bound(tall, theta, FisherVariant::frequentist);
  const auto bay = fisher_lower_bound(tall, theta);
  CHECK((freq.per_component_bound.array() >= bay.per_component_bound.array()).all());
  CHECK((freq.evaluation_point - theta).cwiseAbs().maxCoeff() == 0.0);
}
