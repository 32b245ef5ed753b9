#include "linprobit/experiments.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "linprobit/baselines.hpp"
#include "linprobit/errors.hpp"
#include "linprobit/metrics.hpp"
#include "linprobit/random.hpp"
#include "linprobit/rasch.hpp"
#include "linprobit/specfun.hpp"

namespace linprobit {

namespace {

constexpr std::size_t kNumEstimators = 6;
constexpr std::array<Estimator, kNumEstimators> kAllEstimators{Estimator::lmmse,     Estimator::pm_gibbs,
                                                               Estimator::map,       Estimator::logit_map,
                                                               Estimator::fisher_bound, Estimator::ls};

std::size_t slot(Estimator e) { return static_cast<std::size_t>(e); }

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs fn(0..count-1) on up to `threads` workers; rethrows the first escaped
// exception after every worker has stopped.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t derived_seed(std::initializer_list<std::uint64_t> key) { return Rng(key).next_u64(); }

double mean_squared_error(const Vector& estimate, const Vector& truth) {
  return (estimate - truth).squaredNorm() / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// Synthetic study

struct Cell {
  int users;
  int items;
  double snr_db;
  double sigma2;
};

struct TrialOutput {
  std::array<std::optional<double>, kNumEstimators> value;
  std::array<std::string, kNumEstimators> error;
  std::array<double, kNumEstimators> seconds{};
  double analytical = 0.0;           // known difficulties only
  std::optional<double> predicted;   // known difficulties only
};

template <class Fn>
void timed(TrialOutput& out, Estimator e, Fn&& fn) {
  const auto start = Clock::now();
  try {
    out.value[slot(e)] = fn();
  } catch (const Error& err) {
    out.error[slot(e)] = err.what();
  }
  out.seconds[slot(e)] = seconds_since(start);
}

bool wants(const SyntheticConfig& config, Estimator e) { return config.estimators.count(e) > 0; }

// The LS estimator needs E = c D of full column rank; checking D^T D avoids
// forming the M x M moments for designs where LS is undefined anyway.
void require_full_column_rank(const SparseMatrix& design) {
  const Matrix gram = Matrix(design.transpose() * design);
  const Eigen::ColPivHouseholderQR<Matrix> qr(gram);
  if (qr.rank() < gram.cols())
    throw DomainError("the LS estimator requires E with linearly independent columns (rank " +
                      std::to_string(qr.rank()) + " < " + std::to_string(gram.cols()) + ")");
}

TrialOutput run_standard_trial(const SyntheticConfig& config, const Cell& cell, std::size_t cell_index,
                               std::size_t trial) {
  const int U = cell.users;
  const int Q = cell.items;
  const double sd = std::sqrt(cell.sigma2);
  Rng rng({config.seed, cell_index, trial, 0});
  Vector truth(U + Q);  // stacked [a; -d]
  for (int u = 0; u < U; ++u) truth[u] = rng.normal(0.0, sd);
  for (int i = 0; i < Q; ++i) truth[U + i] = -rng.normal(0.0, sd);
  Eigen::MatrixXi Y(U, Q);
  for (int u = 0; u < U; ++u)
    for (int i = 0; i < Q; ++i) Y(u, i) = truth[u] + truth[U + i] + rng.normal() >= 0.0 ? 1 : -1;

  const RaschDesign design{U, Q, cell.sigma2, cell.sigma2};
  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(U) * static_cast<std::size_t>(Q));
  for (int u = 0; u < U; ++u)
    for (int i = 0; i < Q; ++i) obs.push_back({u, i, Y(u, i)});
  const ResponseSet responses(std::move(obs), U, Q);
  const Vector y = response_vector(responses);
  std::optional<SparseProbitModel> sparse;
  auto sparse_model = [&]() -> const SparseProbitModel& {
    if (!sparse) sparse = rasch_sparse_model(design, responses);
    return *sparse;
  };

  const Eigen::Index scored = config.include_difficulties ? U + Q : U;
  auto score = [&](const Vector& est) { return mean_squared_error(est.head(scored), truth.head(scored)); };

  TrialOutput out;
  if (wants(config, Estimator::lmmse))
    timed(out, Estimator::lmmse, [&] { return score(rasch_fast_lmmse_fit(design, Y).estimate); });
  if (wants(config, Estimator::ls))
    timed(out, Estimator::ls, [&] {
      require_full_column_rank(sparse_model().design());
      return score(ls_fit(rasch_design_matrix(design, &responses), y).estimate);
    });
  if (wants(config, Estimator::map))
    timed(out, Estimator::map, [&] { return score(map_fit(sparse_model(), y).estimate); });
  if (wants(config, Estimator::logit_map))
    timed(out, Estimator::logit_map, [&] {
      MapConfig mc;
      mc.link = Link::logit;
      return score(map_fit(sparse_model(), y, mc).estimate);
    });
  std::optional<Vector> pm;
  if (wants(config, Estimator::pm_gibbs))
    timed(out, Estimator::pm_gibbs, [&] {
      const GibbsConfig gc{config.gibbs_burn_in, config.gibbs_samples,
                           derived_seed({config.seed, cell_index, trial, 1})};
      pm = pm_gibbs(sparse_model(), y, gc).mean;
      return score(*pm);
    });
  if (wants(config, Estimator::fisher_bound))
    timed(out, Estimator::fisher_bound, [&] {
      const FisherBound fb = fisher_lower_bound(sparse_model(), pm ? *pm : truth);
      return fb.per_component_bound.head(scored).mean();
    });
  return out;
}

TrialOutput run_known_difficulty_trial(const SyntheticConfig& config, const Cell& cell, std::size_t cell_index,
                                       std::size_t trial) {
  const int U = cell.users;
  const int Q = cell.items;
  const double sd = std::sqrt(cell.sigma2);
  Rng rng({config.seed, cell_index, trial, 0});
  Vector ability(U), difficulty(Q);
  for (int u = 0; u < U; ++u) ability[u] = rng.normal(0.0, sd);
  for (int i = 0; i < Q; ++i) difficulty[i] = rng.normal();
  Matrix Y(Q, U);  // column u = responses of user u
  for (int u = 0; u < U; ++u)
    for (int i = 0; i < Q; ++i) Y(i, u) = ability[u] - difficulty[i] + rng.normal() >= 0.0 ? 1.0 : -1.0;

  const KnownDifficultyModel kd{difficulty, 0.0, cell.sigma2};
  const KnownDifficultyEstimator estimator(kd);
  TrialOutput out;
  out.analytical = estimator.predicted_mse();

  const GeneralProbitModel user_model(Matrix::Ones(Q, 1), -difficulty, Vector::Zero(1),
                                      Matrix::Constant(1, 1, cell.sigma2));
  if (Q <= 500) out.predicted = lmmse_predicted_mse(user_model).total;

  auto per_user = [&](auto&& fit) {
    Vector est(U);
    for (int u = 0; u < U; ++u) est[u] = fit(u, Vector(Y.col(u)));
    return est;
  };

  if (wants(config, Estimator::lmmse))
    timed(out, Estimator::lmmse, [&] {
      return mean_squared_error(per_user([&](int, const Vector& y) { return estimator.estimate(y); }), ability);
    });
  if (wants(config, Estimator::ls))
    timed(out, Estimator::ls, [&] {
      return mean_squared_error(per_user([&](int, const Vector& y) { return ls_fit(user_model, y).estimate[0]; }),
                                ability);
    });
  if (wants(config, Estimator::map))
    timed(out, Estimator::map, [&] {
      return mean_squared_error(
          per_user([&](int, const Vector& y) { return map_fit(user_model, y).estimate[0]; }), ability);
    });
  if (wants(config, Estimator::logit_map))
    timed(out, Estimator::logit_map, [&] {
      MapConfig mc;
      mc.link = Link::logit;
      return mean_squared_error(
          per_user([&](int, const Vector& y) { return map_fit(user_model, y, mc).estimate[0]; }), ability);
    });
  std::optional<Vector> pm;
  if (wants(config, Estimator::pm_gibbs))
    timed(out, Estimator::pm_gibbs, [&] {
      pm = per_user([&](int u, const Vector& y) {
        const GibbsConfig gc{config.gibbs_burn_in, config.gibbs_samples,
                             derived_seed({config.seed, cell_index, trial, 1, static_cast<std::uint64_t>(u)})};
        return pm_gibbs(user_model, y, gc).mean[0];
      });
      return mean_squared_error(*pm, ability);
    });
  if (wants(config, Estimator::fisher_bound))
    timed(out, Estimator::fisher_bound, [&] {
      const Vector& at = pm ? *pm : ability;
      double sum = 0.0;
      for (int u = 0; u < U; ++u)
        sum += fisher_lower_bound(user_model, Vector::Constant(1, at[u])).per_component_bound[0];
      return sum / U;
    });
  return out;
}

CellResult aggregate(const SyntheticConfig& config, const Cell& cell, const std::vector<TrialOutput>& trials) {
  CellResult res;
  res.users = cell.users;
  res.items = cell.items;
  res.snr_db = cell.snr_db;
  res.sigma2 = cell.sigma2;

  if (config.known_difficulties) {
    double sum = 0.0;
    double psum = 0.0;
    bool have_predicted = true;
    for (const TrialOutput& t : trials) {
      sum += t.analytical;
      if (t.predicted) psum += *t.predicted;
      else have_predicted = false;
    }
    res.analytical_lmmse_mse = sum / static_cast<double>(trials.size());
    if (have_predicted) res.predicted_lmmse_mse = psum / static_cast<double>(trials.size());
  } else {
    const RaschMse mse = rasch_closed_form_mse(cell.users, cell.items, cell.sigma2);
    res.analytical_lmmse_mse = config.include_difficulties
                                   ? (cell.users * mse.ability + cell.items * mse.difficulty) /
                                         static_cast<double>(cell.users + cell.items)
                                   : mse.ability;
    res.asymptotic_mse = rasch_asymptotic_mse(cell.sigma2);
    if (static_cast<long>(cell.users) * cell.items <= 1500) {
      const RaschDesign design{cell.users, cell.items, cell.sigma2, cell.sigma2};
      const PredictedMse p = lmmse_predicted_mse(rasch_design_matrix(design));
      res.predicted_lmmse_mse = config.include_difficulties ? p.per_component.mean()
                                                            : p.per_component.head(cell.users).mean();
    }
  }

  for (Estimator e : kAllEstimators) {
    if (!wants(config, e)) continue;
    EstimatorStats st;
    st.estimator = e;
    std::vector<double> values;
    for (const TrialOutput& t : trials) {
      st.wall_time_seconds += t.seconds[slot(e)];
      if (t.value[slot(e)]) {
        values.push_back(*t.value[slot(e)]);
      } else {
        ++st.failures;
        if (st.first_error.empty()) st.first_error = t.error[slot(e)];
      }
    }
    st.trials = values.size();
    const MeanStd ms = mean_std(values);
    st.mean = ms.mean;
    st.std_error = values.empty() ? 0.0 : ms.stddev / std::sqrt(static_cast<double>(values.size()));
    res.estimators.push_back(std::move(st));
  }
  return res;
}

std::vector<Cell> enumerate_cells(const SyntheticConfig& config) {
  std::vector<Cell> cells;
  for (int U : config.users_grid)
    for (int Q : config.items_grid)
      for (double snr : config.snr_db_grid) cells.push_back({U, Q, snr, snr_to_sigma2(snr)});
  return cells;
}

// ---------------------------------------------------------------------------
// Cross-validation

bool is_predictive(Estimator e) {
  return e == Estimator::lmmse || e == Estimator::map || e == Estimator::logit_map || e == Estimator::pm_gibbs;
}

Vector fit_stacked(Estimator e, const RaschDesign& design, const ResponseSet& train, const CvConfig& config,
                   std::uint64_t gibbs_seed) {
  if (train.empty()) return Vector::Zero(design.num_parameters());
  switch (e) {
    case Estimator::lmmse: return rasch_lmmse_fit(design, train).estimate;
    case Estimator::map: return map_fit(rasch_sparse_model(design, train), response_vector(train)).estimate;
    case Estimator::logit_map: {
      MapConfig mc;
      mc.link = Link::logit;
      return map_fit(rasch_sparse_model(design, train), response_vector(train), mc).estimate;
    }
    case Estimator::pm_gibbs: {
      const GibbsConfig gc{config.gibbs_burn_in, config.gibbs_samples, gibbs_seed};
      return pm_gibbs(rasch_sparse_model(design, train), response_vector(train), gc).mean;
    }
    default: throw DomainError(std::string("estimator '") + to_string(e) + "' cannot predict responses");
  }
}

std::vector<double> predict(Estimator e, const Vector& stacked, int users, const ResponseSet& data,
                            const std::vector<std::size_t>& positions) {
  std::vector<double> p;
  p.reserve(positions.size());
  for (std::size_t pos : positions) {
    const Observation& o = data.observations()[pos];
    const double t = stacked[o.user] + stacked[users + o.item];  // a_u - d_i
    p.push_back(e == Estimator::logit_map ? 1.0 / (1.0 + std::exp(-t)) : norm_cdf(t));
  }
  return p;
}

std::vector<int> labels_at(const ResponseSet& data, const std::vector<std::size_t>& positions) {
  std::vector<int> out;
  out.reserve(positions.size());
  for (std::size_t pos : positions) out.push_back(data.observations()[pos].response);
  return out;
}

FoldRecord run_fold(Estimator e, std::size_t e_index, int fold, const ResponseSet& data,
                    const std::vector<int>& fold_of, const CvConfig& config) {
  const int K = config.folds;
  const int validation = (fold + 1) % K;
  std::vector<std::size_t> test, train, inner_train, valid;
  for (std::size_t k = 0; k < fold_of.size(); ++k) {
    if (fold_of[k] == fold) {
      test.push_back(k);
      continue;
    }
    train.push_back(k);
    (fold_of[k] == validation ? valid : inner_train).push_back(k);
  }

  FoldRecord rec;
  rec.fold = fold;
  try {
    if (test.empty()) throw DataError("fold " + std::to_string(fold) + " holds no observations");
    const int U = data.num_users();
    const int Q = data.num_items();
    const ResponseSet train_set = data.subset(train);
    const ResponseSet inner_set = data.subset(inner_train);

    std::vector<double> grid = config.prior_variance_grid;
    std::sort(grid.begin(), grid.end());
    double best_acc = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double s2 = grid[g];
      const RaschDesign design{U, Q, s2, s2};
      const Vector est = fit_stacked(e, design, inner_set, config,
                                     derived_seed({config.seed, e_index, static_cast<std::uint64_t>(fold), g, 2}));
      const double acc =
          valid.empty() ? 0.0 : accuracy(predict(e, est, U, data, valid), labels_at(data, valid));
      if (acc > best_acc) {
        best_acc = acc;
        rec.selected_sigma2 = s2;
      }
    }

    const RaschDesign design{U, Q, rec.selected_sigma2, rec.selected_sigma2};
    const auto start = Clock::now();
    const Vector est =
        fit_stacked(e, design, train_set, config, derived_seed({config.seed, e_index, static_cast<std::uint64_t>(fold), 3}));
    rec.runtime_seconds = seconds_since(start);

    std::vector<char> user_seen(static_cast<std::size_t>(U), 0), item_seen(static_cast<std::size_t>(Q), 0);
    for (std::size_t k : train) {
      user_seen[data.observations()[k].user] = 1;
      item_seen[data.observations()[k].item] = 1;
    }
    std::vector<char> user_counted(static_cast<std::size_t>(U), 0), item_counted(static_cast<std::size_t>(Q), 0);
    for (std::size_t k : test) {
      const Observation& o = data.observations()[k];
      if (!user_seen[o.user] && !user_counted[o.user]) {
        user_counted[o.user] = 1;
        ++rec.cold_users;
      }
      if (!item_seen[o.item] && !item_counted[o.item]) {
        item_counted[o.item] = 1;
        ++rec.cold_items;
      }
    }

    const std::vector<double> p = predict(e, est, U, data, test);
    const std::vector<int> labels = labels_at(data, test);
    rec.accuracy = accuracy(p, labels);
    try {
      rec.auc = auc(p, labels);
    } catch (const DomainError&) {
      rec.auc.reset();
    }
  } catch (const Error& err) {
    rec.error = err.what();
  }
  return rec;
}

}  // namespace

// ---------------------------------------------------------------------------

double snr_to_sigma2(double snr_db) {
  if (!std::isfinite(snr_db)) throw DomainError("SNR must be finite");
  return std::pow(10.0, snr_db / 10.0) / 2.0;
}

const char* to_string(Estimator e) noexcept {
  switch (e) {
    case Estimator::lmmse: return "lmmse";
    case Estimator::pm_gibbs: return "pm_gibbs";
    case Estimator::map: return "map";
    case Estimator::logit_map: return "logit_map";
    case Estimator::fisher_bound: return "fisher_bound";
    case Estimator::ls: return "ls";
  }
  return "unknown";
}

Estimator parse_estimator(std::string_view name) {
  for (Estimator e : kAllEstimators)
    if (name == to_string(e)) return e;
  throw DomainError("unknown estimator '" + std::string(name) +
                    "' (expected lmmse, pm_gibbs, map, logit_map, fisher_bound or ls)");
}

std::set<Estimator> parse_estimators(std::string_view list) {
  std::set<Estimator> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t end = std::min(list.find(',', start), list.size());
    const std::string_view item = list.substr(start, end - start);
    if (!item.empty()) out.insert(parse_estimator(item));
    start = end + 1;
  }
  if (out.empty()) throw DomainError("no estimators given");
  return out;
}

void SyntheticConfig::validate() const {
  if (users_grid.empty() || items_grid.empty() || snr_db_grid.empty()) throw DomainError("grids must be nonempty");
  for (int u : users_grid)
    if (u < 1) throw DomainError("user counts must be positive");
  for (int q : items_grid)
    if (q < 1) throw DomainError("item counts must be positive");
  for (double s : snr_db_grid)
    if (!std::isfinite(s)) throw DomainError("SNR values must be finite");
  if (trials < 1) throw DomainError("trials must be positive");
  if (estimators.empty()) throw DomainError("at least one estimator is required");
  if (gibbs_burn_in < 0 || gibbs_samples < 1) throw DomainError("invalid Gibbs sample counts");
  if (threads < 1) throw DomainError("threads must be positive");
}

const EstimatorStats* CellResult::find(Estimator e) const {
  for (const EstimatorStats& s : estimators)
    if (s.estimator == e) return &s;
  return nullptr;
}

ExperimentResult run_synthetic(const SyntheticConfig& config) {
  config.validate();
  const std::vector<Cell> cells = enumerate_cells(config);
  const auto trials = static_cast<std::size_t>(config.trials);
  std::vector<std::vector<TrialOutput>> outputs(cells.size(), std::vector<TrialOutput>(trials));

  parallel_for(cells.size() * trials, config.threads, [&](std::size_t unit) {
    const std::size_t c = unit / trials;
    const std::size_t t = unit % trials;
    outputs[c][t] = config.known_difficulties ? run_known_difficulty_trial(config, cells[c], c, t)
                                              : run_standard_trial(config, cells[c], c, t);
  });

  ExperimentResult result;
  result.config = config;
  for (std::size_t c = 0; c < cells.size(); ++c) result.cells.push_back(aggregate(config, cells[c], outputs[c]));
  return result;
}

double projected_runtime_seconds(const SyntheticConfig& config) {
  double total = 0.0;
  for (int U : config.users_grid)
    for (int Q : config.items_grid) {
      const double m = static_cast<double>(U) * Q;
      const double n = static_cast<double>(U) + Q;
      double per_trial = 2e-8 * m;
      if (config.estimators.count(Estimator::pm_gibbs))
        per_trial += (config.gibbs_burn_in + config.gibbs_samples) * (7e-8 * m + 2e-9 * n * n);
      if (config.estimators.count(Estimator::map) || config.estimators.count(Estimator::logit_map))
        per_trial += 10.0 * (n * n * n / 3.0 * 1e-9 + 5e-8 * m);
      if (config.estimators.count(Estimator::fisher_bound)) per_trial += n * n * n * 1e-9;
      total += per_trial * config.trials * static_cast<double>(config.snr_db_grid.size());
    }
  return total;
}

void CvConfig::validate() const {
  if (folds < 2) throw DomainError("cross-validation needs at least two folds");
  if (prior_variance_grid.empty()) throw DomainError("prior variance grid must be nonempty");
  for (double v : prior_variance_grid)
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("prior variances must be positive");
  if (estimators.empty()) throw DomainError("at least one estimator is required");
  for (Estimator e : estimators)
    if (!is_predictive(e))
      throw DomainError(std::string("estimator '") + to_string(e) + "' does not predict responses");
  if (gibbs_burn_in < 0 || gibbs_samples < 1) throw DomainError("invalid Gibbs sample counts");
  if (threads < 1) throw DomainError("threads must be positive");
}

std::vector<int> assign_folds(std::size_t observations, int folds, std::uint64_t seed) {
  if (folds < 1) throw DomainError("fold count must be positive");
  std::vector<std::size_t> perm(observations);
  for (std::size_t k = 0; k < observations; ++k) perm[k] = k;
  Rng rng({seed, 0x666f6c64u});
  for (std::size_t k = observations; k > 1; --k) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(k));
    std::swap(perm[k - 1], perm[std::min(j, k - 1)]);
  }
  std::vector<int> fold_of(observations);
  for (std::size_t k = 0; k < observations; ++k) fold_of[perm[k]] = static_cast<int>(k % folds);
  return fold_of;
}

CvResult run_cross_validation(const ResponseSet& data, const CvConfig& config) {
  config.validate();
  if (data.empty()) throw DataError("cross-validation needs a nonempty response set");
  if (data.size() < static_cast<std::size_t>(config.folds))
    throw DataError("fewer observations than folds");

  const std::vector<int> fold_of = assign_folds(data.size(), config.folds, config.seed);
  const std::vector<Estimator> estimators(config.estimators.begin(), config.estimators.end());
  const auto K = static_cast<std::size_t>(config.folds);
  std::vector<std::vector<FoldRecord>> records(estimators.size(), std::vector<FoldRecord>(K));

  parallel_for(estimators.size() * K, config.threads, [&](std::size_t unit) {
    const std::size_t e = unit / K;
    const auto f = static_cast<int>(unit % K);
    records[e][f] = run_fold(estimators[e], static_cast<std::size_t>(estimators[e]), f, data, fold_of, config);
  });

  CvResult result;
  result.config = config;
  result.observations = data.size();
  result.users = data.num_users();
  result.items = data.num_items();
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    CvEstimatorResult r;
    r.estimator = estimators[e];
    std::vector<double> accs, aucs;
    for (const FoldRecord& rec : records[e]) {
      if (!rec.error.empty()) continue;
      accs.push_back(rec.accuracy);
      if (rec.auc) aucs.push_back(*rec.auc);
    }
    const MeanStd acc = mean_std(accs);
    const MeanStd au = mean_std(aucs);
    r.acc_mean = acc.mean;
    r.acc_std = acc.stddev;
    r.auc_mean = au.mean;
    r.auc_std = au.stddev;
    r.folds = std::move(records[e]);
    result.estimators.push_back(std::move(r));
  }
  return result;
}

}  // namespace linprobit
