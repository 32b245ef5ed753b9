#include <string>

#include "doctest.h"
#include "json.hpp"
#include "linprobit/errors.hpp"
#include "linprobit/serialize.hpp"

using namespace linprobit;
using nlohmann::json;

namespace {

ExperimentResult small_result() {
  SyntheticConfig c;
  c.users_grid = {3};
  c.items_grid = {2, 4};
  c.snr_db_grid = {0.0};
  c.trials = 3;
  c.estimators = {Estimator::lmmse, Estimator::ls};
  return run_synthetic(c);
}

}  // namespace

TEST_CASE("shortest round-trip doubles") {
  for (double v : {0.1, 1.0 / 3.0, 5.0, -2.5e-300, 123456789.125}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(5.0) == "5");
}

TEST_CASE("synthetic CSV layout") {
  const std::string csv = to_csv(small_result());
  const auto first_newline = csv.find('\n');
  const std::string header = csv.substr(0, first_newline);
  CHECK(header ==
        "schema_version,U,Q,snr_db,sigma2_x,analytical_lmmse_mse,predicted_lmmse_mse,asymptotic_mse,"
        "lmmse_mean,lmmse_stderr,lmmse_trials,lmmse_failures,ls_mean,ls_stderr,ls_trials,ls_failures");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.substr(first_newline + 1, 6) == "1,3,2,");
}

TEST_CASE("synthetic JSON") {
  const auto result = small_result();
  const json j = json::parse(to_json(result));
  CHECK(j.at("schema_version") == kSchemaVersion);
  CHECK(j.at("cells").size() == 2);
  CHECK(j.dump().find("wall_time") != std::string::npos);
  CHECK(json::parse(to_json(result, false)).dump().find("wall_time") == std::string::npos);
}

TEST_CASE("config round-trips") {
  SyntheticConfig c;
  c.users_grid = {7, 9};
  c.snr_db_grid = {-3.5};
  c.trials = 17;
  c.seed = 12345678901234ULL;
  c.estimators = {Estimator::pm_gibbs, Estimator::fisher_bound};
  c.known_difficulties = true;
  c.gibbs_samples = 77;
  const SyntheticConfig back = synthetic_config_from_json(to_json(c));
  CHECK(back.users_grid == c.users_grid);
  CHECK(back.snr_db_grid == c.snr_db_grid);
  CHECK(back.trials == 17);
  CHECK(back.seed == c.seed);
  CHECK(back.estimators == c.estimators);
  CHECK(back.known_difficulties);
  CHECK(back.gibbs_samples == 77);
  CHECK(json::parse(to_json(c)).at("schema_version") == kSchemaVersion);

  CvConfig cv;
  cv.folds = 4;
  cv.prior_variance_grid = {0.3, 3.0};
  const CvConfig cv_back = cv_config_from_json(to_json(cv));
  CHECK(cv_back.folds == 4);
  CHECK(cv_back.prior_variance_grid == cv.prior_variance_grid);
  CHECK(cv_back.estimators == cv.estimators);

  CHECK(synthetic_config_from_json(R"({"trials": 5})").items_grid == SyntheticConfig{}.items_grid);
  CHECK_THROWS_AS(synthetic_config_from_json(R"({"trails": 5})"), DomainError);
  CHECK_THROWS_AS(synthetic_config_from_json(R"({"trials": "many"})"), DomainError);
  CHECK_THROWS_AS(synthetic_config_from_json("[1, 2]"), DomainError);
  CHECK_THROWS_AS(cv_config_from_json(R"({"folds": 10, "extra": true})"), DomainError);
}

TEST_CASE("cross-validation CSV and JSON") {
  CvConfig c;
  c.folds = 2;
  c.estimators = {Estimator::lmmse};
  const CvResult r = run_cross_validation(ResponseSet::from_matrix({{1, -1, 1}, {-1, 1, -1}, {1, 1, -1}}), c);
  const std::string csv = to_csv(r);
  CHECK(csv.rfind("schema_version,estimator,fold,selected_sigma2_x,accuracy,auc,runtime_seconds,cold_users,"
                  "cold_items,error\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  const json j = json::parse(to_json(r));
  CHECK(j.at("schema_version") == kSchemaVersion);
  CHECK(j.at("estimators").size() == 1);
}
