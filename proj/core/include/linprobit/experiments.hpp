#pragma once

// Synthetic MSE study and response-pair cross-validation harnesses.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "linprobit/data.hpp"

namespace linprobit {

/// sigma2_x = 10^(snr_db / 10) / 2: the noiseless predictor a_u - d_i has
/// variance 2 sigma2_x against unit noise variance.
double snr_to_sigma2(double snr_db);

enum class Estimator { lmmse, pm_gibbs, map, logit_map, fisher_bound, ls };

const char* to_string(Estimator e) noexcept;
/// Throws DomainError on an unknown name.
Estimator parse_estimator(std::string_view name);
/// Comma-separated list of names.
std::set<Estimator> parse_estimators(std::string_view list);

struct SyntheticConfig {
  std::vector<int> users_grid{20, 50, 100};
  std::vector<int> items_grid{20, 50, 100};
  std::vector<double> snr_db_grid{-10.0, 0.0, 10.0};
  int trials = 1000;
  std::set<Estimator> estimators{Estimator::lmmse};
  std::uint64_t seed = 0;
  /// Item difficulties drawn from N(0, 1) and treated as known; abilities are
  /// estimated per user.
  bool known_difficulties = false;
  /// Average the empirical MSE over difficulty components as well.
  bool include_difficulties = false;
  int gibbs_burn_in = 10'000;
  int gibbs_samples = 20'000;
  int threads = 1;

  /// Throws DomainError on empty grids, nonpositive sizes or trials.
  void validate() const;
};

struct EstimatorStats {
  Estimator estimator = Estimator::lmmse;
  std::size_t trials = 0;    ///< successful trials
  std::size_t failures = 0;  ///< trials where the estimator raised an error
  std::string first_error;
  double mean = 0.0;      ///< mean per-trial MSE (or bound, for fisher_bound)
  double std_error = 0.0;  ///< standard error of the mean
  double wall_time_seconds = 0.0;
};

struct CellResult {
  int users = 0;
  int items = 0;
  double snr_db = 0.0;
  double sigma2 = 0.0;
  /// Closed-form per-user MSE of the linear MMSE estimator; for known
  /// difficulties, the mean over trials of the exact per-trial value.
  double analytical_lmmse_mse = 0.0;
  /// Mean of the general-path predicted per-user MSE, when affordable.
  std::optional<double> predicted_lmmse_mse;
  /// Large-U,Q limit of the per-user MSE (absent for known difficulties).
  std::optional<double> asymptotic_mse;
  std::vector<EstimatorStats> estimators;  ///< in Estimator enum order

  const EstimatorStats* find(Estimator e) const;
};

struct ExperimentResult {
  SyntheticConfig config;
  std::vector<CellResult> cells;
};

/// Deterministic for a given config regardless of the thread count. Each
/// (cell, trial) unit draws from its own stream keyed by (seed, cell, trial).
ExperimentResult run_synthetic(const SyntheticConfig& config);

/// Rough single-thread runtime in seconds, used for warnings.
double projected_runtime_seconds(const SyntheticConfig& config);

struct CvConfig {
  int folds = 10;
  std::uint64_t seed = 0;
  std::vector<double> prior_variance_grid{0.1, 0.2, 0.5, 1.0, 2.0, 5.0};
  std::set<Estimator> estimators{Estimator::lmmse, Estimator::map, Estimator::logit_map};
  int gibbs_burn_in = 10'000;
  int gibbs_samples = 20'000;
  int threads = 1;

  /// Throws DomainError on folds < 2, an empty grid or non-predictive estimators.
  void validate() const;
};

struct FoldRecord {
  int fold = 0;
  double selected_sigma2 = 0.0;
  double accuracy = 0.0;
  std::optional<double> auc;  ///< absent when the held-out fold has one class
  double runtime_seconds = 0.0;  ///< final fit on the training folds
  int cold_users = 0;  ///< held-out users without training responses
  int cold_items = 0;
  std::string error;  ///< nonempty when the fold failed
};

struct CvEstimatorResult {
  Estimator estimator = Estimator::lmmse;
  double acc_mean = 0.0;
  double acc_std = 0.0;
  double auc_mean = 0.0;
  double auc_std = 0.0;
  std::vector<FoldRecord> folds;
};

struct CvResult {
  CvConfig config;
  std::size_t observations = 0;
  int users = 0;
  int items = 0;
  std::vector<CvEstimatorResult> estimators;
};

/// Fold k is held out; fold (k + 1) mod K picks sigma2 from the grid by
/// validation accuracy (ties to the smaller value); the final fit uses every
/// fold except k. Parameters without training data stay at the prior mean 0.
CvResult run_cross_validation(const ResponseSet& data, const CvConfig& config);

/// Assignment of observation positions to folds (uniform random permutation,
/// dealt round-robin).
std::vector<int> assign_folds(std::size_t observations, int folds, std::uint64_t seed);

}  // namespace linprobit
