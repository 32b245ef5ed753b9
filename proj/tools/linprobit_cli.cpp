// linprobit: closed-form analysis, synthetic simulation, model fitting and
// cross-validation from the command line.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "linprobit/baselines.hpp"
#include "linprobit/data.hpp"
#include "linprobit/errors.hpp"
#include "linprobit/experiments.hpp"
#include "linprobit/rasch.hpp"
#include "linprobit/serialize.hpp"
#include "linprobit/specfun.hpp"

namespace fs = std::filesystem;
using namespace linprobit;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCompute = 1;
constexpr int kExitUsage = 2;

const CLI::Range kPositiveInt(1, std::numeric_limits<int>::max(), "POSITIVE");
const CLI::Range kNonNegativeInt(0, std::numeric_limits<int>::max(), "NONNEGATIVE");

// Flag combinations that parse but make no sense; reported as exit 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs f, reporting domain errors from option validation as usage errors.
template <class F>
auto checked_options(F&& f) {
  try {
    return f();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

fs::path default_output_dir() {
  if (const char* env = std::getenv("LINPROBIT_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

// Writes to a sibling temp file, then renames over the destination.
void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw DataError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot move output into place at " + path.string());
  }
}

struct OutputOptions {
  std::string format = "csv";
  std::string output;
  std::string output_dir;

  fs::path resolve(const std::string& stem, const std::string& ext) const {
    if (!output.empty()) return output;
    const fs::path dir = output_dir.empty() ? default_output_dir() : fs::path(output_dir);
    return dir / (stem + "." + ext);
  }
};

void add_output_flags(CLI::App* cmd, OutputOptions& out, bool with_format) {
  if (with_format)
    cmd->add_option("--format", out.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  cmd->add_option("-o,--output", out.output, "Output file (overrides --output-dir)");
  cmd->add_option("--output-dir", out.output_dir,
                  "Directory for default-named outputs (default: $LINPROBIT_OUTPUT_DIR or the working directory)");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

std::string fmt_fixed(double v, int decimals = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
  std::vector<int> users{20, 50, 100};
  std::vector<int> items{20, 50, 100};
  std::vector<double> snr_db;
  std::vector<double> sigma2;
  bool known_difficulties = false;
  std::string difficulty_file;
  double difficulty_sigma2 = 1.0;
  OutputOptions out;
};

struct AnalyzeRow {
  int users;
  int items;
  double snr_db;
  double sigma2;
  std::optional<double> ability;
  std::optional<double> difficulty;
  std::optional<double> asymptotic;
  std::optional<double> fisher;
};

std::vector<double> load_difficulties(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<double> d;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double v;
    std::string rest;
    if (!(ss >> v) || (ss >> rest) || !std::isfinite(v))
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected one difficulty per line");
    d.push_back(v);
  }
  if (d.empty()) throw DataError(path.string() + ": no difficulties");
  return d;
}

// Difficulties at the (i + 1/2)/Q quantiles of N(0, sigma2_d).
Vector quantile_difficulties(int items, double sigma2_d) {
  Vector d(items);
  for (int i = 0; i < items; ++i) d[i] = std::sqrt(sigma2_d) * norm_cdf_inv((i + 0.5) / items);
  return d;
}

AnalyzeRow analyze_standard(int U, int Q, double snr_db, double sigma2) {
  AnalyzeRow row{U, Q, snr_db, sigma2, 0.0, 0.0, 0.0, 0.0};
  if (sigma2 == 0.0) return row;
  const RaschMse mse = rasch_closed_form_mse(U, Q, sigma2);
  row.ability = mse.ability;
  row.difficulty = mse.difficulty;
  row.asymptotic = rasch_asymptotic_mse(sigma2);
  // Every observation has t = 0 at theta = 0, so the information is
  // (2/pi) D^T D; the sparse path keeps large grids cheap.
  const RaschDesign design{U, Q, sigma2, sigma2};
  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(U) * Q);
  for (int u = 0; u < U; ++u)
    for (int i = 0; i < Q; ++i) obs.push_back({u, i, 1});
  const ResponseSet full(std::move(obs), U, Q);
  const FisherBound fb = fisher_lower_bound(rasch_sparse_model(design, full), Vector::Zero(U + Q));
  row.fisher = fb.per_component_bound.head(U).mean();
  return row;
}

AnalyzeRow analyze_known(int U, const Vector& difficulties, double snr_db, double sigma2) {
  const int Q = static_cast<int>(difficulties.size());
  AnalyzeRow row{U, Q, snr_db, sigma2, 0.0, std::nullopt, std::nullopt, 0.0};
  if (sigma2 == 0.0) return row;
  row.ability = KnownDifficultyEstimator({difficulties, 0.0, sigma2}).predicted_mse();
  double info = 1.0 / sigma2;
  for (Eigen::Index i = 0; i < difficulties.size(); ++i) info += probit_information(-difficulties[i]);
  row.fisher = 1.0 / info;
  return row;
}

std::string analyze_csv(const std::vector<AnalyzeRow>& rows) {
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::string out =
      "U,Q,snr_db,sigma2_x,mse_ability_closed_form,mse_difficulty_closed_form,mse_asymptotic,fisher_bound\n";
  for (const AnalyzeRow& r : rows) {
    out += std::to_string(r.users) + ',' + std::to_string(r.items) + ',' +
           (std::isfinite(r.snr_db) ? format_double(r.snr_db) : std::string()) + ',' + format_double(r.sigma2) +
           ',' + cell(r.ability) + ',' + cell(r.difficulty) + ',' + cell(r.asymptotic) + ',' + cell(r.fisher) +
           '\n';
  }
  return out;
}

std::string analyze_json(const std::vector<AnalyzeRow>& rows, bool known) {
  auto num = [](const std::optional<double>& v) -> ordered_json {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
  };
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["known_difficulties"] = known;
  j["rows"] = ordered_json::array();
  for (const AnalyzeRow& r : rows) {
    ordered_json row;
    row["U"] = r.users;
    row["Q"] = r.items;
    row["snr_db"] = num(r.snr_db);
    row["sigma2_x"] = r.sigma2;
    row["mse_ability_closed_form"] = num(r.ability);
    row["mse_difficulty_closed_form"] = num(r.difficulty);
    row["mse_asymptotic"] = num(r.asymptotic);
    row["fisher_bound"] = num(r.fisher);
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

int run_analyze(const AnalyzeOptions& o, bool items_given, bool difficulty_sigma2_given) {
  if (!o.snr_db.empty() && !o.sigma2.empty()) throw UsageError("give either --snr-db or --sigma2, not both");
  if (!o.known_difficulties && (!o.difficulty_file.empty() || difficulty_sigma2_given))
    throw UsageError("--difficulty-file and --difficulty-sigma2 require --known-difficulties");
  if (!o.difficulty_file.empty() && difficulty_sigma2_given)
    throw UsageError("give either --difficulty-file or --difficulty-sigma2, not both");
  if (!o.difficulty_file.empty() && items_given)
    throw UsageError("--items cannot be combined with --difficulty-file (Q is the file length)");

  const auto levels = checked_options([&] {
    std::vector<std::pair<double, double>> out;  // (snr_db, sigma2)
    if (!o.sigma2.empty()) {
      for (double s : o.sigma2) out.emplace_back(s > 0.0 ? 10.0 * std::log10(2.0 * s) : -INFINITY, s);
    } else {
      const std::vector<double> snr = o.snr_db.empty() ? std::vector<double>{-10.0, 0.0, 10.0} : o.snr_db;
      for (double s : snr) out.emplace_back(s, snr_to_sigma2(s));
    }
    return out;
  });

  std::vector<AnalyzeRow> rows;
  if (o.known_difficulties) {
    std::vector<Vector> sets;
    if (!o.difficulty_file.empty()) {
      const auto d = load_difficulties(o.difficulty_file);
      sets.emplace_back(Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size())));
    } else {
      for (int Q : o.items) sets.push_back(quantile_difficulties(Q, o.difficulty_sigma2));
    }
    for (int U : o.users)
      for (const Vector& d : sets)
        for (auto [snr, s2] : levels) rows.push_back(analyze_known(U, d, snr, s2));
  } else {
    for (int U : o.users)
      for (int Q : o.items)
        for (auto [snr, s2] : levels) rows.push_back(analyze_standard(U, Q, snr, s2));
  }

  const bool json = o.out.format == "json";
  const fs::path path = o.out.resolve("analyze", o.out.format);
  write_atomic(path, json ? analyze_json(rows, o.known_difficulties) : analyze_csv(rows));
  std::cout << "wrote " << rows.size() << " rows to " << path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string config;
  std::vector<int> users;
  std::vector<int> items;
  std::vector<double> snr_db;
  int trials = 0;
  std::uint64_t seed = 0;
  std::string estimators;
  int gibbs_burn_in = 0;
  int gibbs_samples = 0;
  bool known_difficulties = false;
  bool include_difficulties = false;
  int threads = default_threads();
  OutputOptions out;
};

void print_simulation_table(const ExperimentResult& r) {
  std::cout << "    U     Q  snr_db   sigma2x  analytical";
  if (!r.cells.empty())
    for (const auto& st : r.cells.front().estimators) {
      std::string name = to_string(st.estimator);
      std::cout << "  " << std::string(std::max<int>(0, 22 - static_cast<int>(name.size())), ' ') << name;
    }
  std::cout << "\n";
  for (const CellResult& c : r.cells) {
    std::printf("%5d %5d %7s %9s %11s", c.users, c.items, fmt(c.snr_db, 3).c_str(), fmt(c.sigma2, 4).c_str(),
                fmt(c.analytical_lmmse_mse, 5).c_str());
    for (const auto& st : c.estimators) {
      std::string cell;
      if (st.trials == 0) cell = "failed";
      else cell = fmt(st.mean, 5) + " +- " + fmt(st.std_error, 2);
      if (st.failures > 0 && st.trials > 0) cell += " (" + std::to_string(st.failures) + " fail)";
      std::printf("  %22s", cell.c_str());
    }
    std::printf("\n");
  }
  std::fflush(stdout);
  for (const CellResult& c : r.cells)
    for (const auto& st : c.estimators)
      if (st.failures > 0)
        std::cerr << "note: " << to_string(st.estimator) << " failed " << st.failures << " time(s) at U=" << c.users
                  << " Q=" << c.items << ": " << st.first_error << "\n";
}

int run_simulate(const SimulateOptions& o, const CLI::App& cmd) {
  const SyntheticConfig c = checked_options([&] {
    SyntheticConfig cfg;
    if (!o.config.empty()) cfg = synthetic_config_from_json(read_file(o.config));
    if (cmd.count("--users")) cfg.users_grid = o.users;
    if (cmd.count("--items")) cfg.items_grid = o.items;
    if (cmd.count("--snr-db")) cfg.snr_db_grid = o.snr_db;
    if (cmd.count("--trials")) cfg.trials = o.trials;
    if (cmd.count("--seed")) cfg.seed = o.seed;
    if (cmd.count("--estimators")) cfg.estimators = parse_estimators(o.estimators);
    if (cmd.count("--gibbs-burnin")) cfg.gibbs_burn_in = o.gibbs_burn_in;
    if (cmd.count("--gibbs-samples")) cfg.gibbs_samples = o.gibbs_samples;
    if (cmd.count("--known-difficulties")) cfg.known_difficulties = o.known_difficulties;
    if (cmd.count("--include-difficulties")) cfg.include_difficulties = o.include_difficulties;
    cfg.threads = o.threads;
    cfg.validate();
    return cfg;
  });

  const double projected = projected_runtime_seconds(c) / c.threads;
  if (projected > 600.0)
    std::cerr << "warning: projected runtime is about " << fmt(projected / 60.0, 3) << " minutes on " << c.threads
              << " thread(s)\n";

  const ExperimentResult result = run_synthetic(c);
  const bool json = o.out.format == "json";
  const fs::path path = o.out.resolve("simulate", o.out.format);
  write_atomic(path, json ? to_json(result) : to_csv(result));
  print_simulation_table(result);
  std::cout << "wrote " << result.cells.size() << " cells to " << path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit and crossval share data loading

struct DataOptions {
  std::string data;
  std::string movielens;
  std::string labels = "pm_one";
};

void add_data_flags(CLI::App* cmd, DataOptions& d) {
  auto* data = cmd->add_option("--data", d.data, "Response triplets CSV (header user,item,response)")
                   ->check(CLI::ExistingFile);
  auto* ml = cmd->add_option("--movielens", d.movielens, "MovieLens u.data ratings, binarized at the mean rating")
                 ->check(CLI::ExistingFile);
  data->excludes(ml);
  cmd->add_option("--labels", d.labels, "Response coding in --data")
      ->check(CLI::IsMember({"pm_one", "zero_one"}))
      ->capture_default_str();
}

ResponseSet load_data(const DataOptions& d) {
  if (d.data.empty() && d.movielens.empty()) throw UsageError("one of --data or --movielens is required");
  if (!d.data.empty())
    return load_triplets(d.data, d.labels == "zero_one" ? LabelConvention::zero_one : LabelConvention::pm_one);
  BinarizeReport report;
  ResponseSet set = binarize_ratings(load_movielens(d.movielens), &report);
  std::cerr << "binarized " << report.input_rows << " ratings at mean " << fmt(report.mean_rating, 6) << ": kept "
            << set.size() << " (" << set.num_users() << " users, " << set.num_items() << " items), dropped "
            << report.dropped_ties << " ties\n";
  return set;
}

struct FitCommandOptions {
  DataOptions data;
  std::string estimator = "lmmse";
  double sigma2 = 1.0;
  std::optional<double> sigma2_difficulty;
  std::uint64_t seed = 0;
  int gibbs_burn_in = 10'000;
  int gibbs_samples = 20'000;
  bool with_mse = false;
  OutputOptions out;
};

int run_fit(const FitCommandOptions& o) {
  const Estimator e = checked_options([&] { return parse_estimator(o.estimator); });
  if (e == Estimator::fisher_bound || e == Estimator::ls)
    throw UsageError("fit supports lmmse, map, logit_map and pm_gibbs");
  const ResponseSet data = load_data(o.data);
  if (data.empty()) throw DataError("no observations to fit");

  const RaschDesign design{data.num_users(), data.num_items(), o.sigma2, o.sigma2_difficulty.value_or(o.sigma2)};
  checked_options([&] { design.validate(); });

  const auto start = std::chrono::steady_clock::now();
  Vector stacked;
  std::optional<double> predicted;
  std::string path_name;
  switch (e) {
    case Estimator::lmmse: {
      RaschCgOptions opts;
      opts.with_mse = o.with_mse || design.num_parameters() <= 2000;
      const LmmseSolution sol = rasch_lmmse_fit(design, data, opts);
      stacked = sol.estimate;
      predicted = sol.predicted_mse;
      path_name = to_string(sol.path);
      break;
    }
    case Estimator::map:
    case Estimator::logit_map: {
      MapConfig mc;
      mc.link = e == Estimator::logit_map ? Link::logit : Link::probit;
      stacked = map_fit(rasch_sparse_model(design, data), response_vector(data), mc).estimate;
      break;
    }
    case Estimator::pm_gibbs: {
      const GibbsConfig gc{o.gibbs_burn_in, o.gibbs_samples, o.seed};
      stacked = pm_gibbs(rasch_sparse_model(design, data), response_vector(data), gc).mean;
      break;
    }
    default: break;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const RaschEstimates est = split_estimate(stacked, design.users);
  std::string csv = "kind,id,estimate\n";
  for (int u = 0; u < design.users; ++u)
    csv += "ability," + data.users().id(u) + ',' + format_double(est.ability[u]) + '\n';
  for (int i = 0; i < design.items; ++i)
    csv += "difficulty," + data.items().id(i) + ',' + format_double(est.difficulty[i]) + '\n';

  const fs::path path = o.out.resolve("fit", "csv");
  fs::path sidecar = path;
  sidecar.replace_extension(".json");
  if (sidecar == path) sidecar += ".json";

  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["estimator"] = to_string(e);
  j["sigma2_ability"] = design.sigma2_ability;
  j["sigma2_difficulty"] = design.sigma2_difficulty;
  j["users"] = design.users;
  j["items"] = design.items;
  j["observations"] = data.size();
  if (predicted) {
    j["predicted_mse"] = *predicted;
    j["predicted_mse_per_parameter"] = *predicted / design.num_parameters();
  } else {
    j["predicted_mse"] = nullptr;
  }
  if (!path_name.empty()) j["solve_path"] = path_name;
  if (e == Estimator::pm_gibbs) {
    j["seed"] = o.seed;
    j["gibbs_burn_in"] = o.gibbs_burn_in;
    j["gibbs_samples"] = o.gibbs_samples;
  }
  j["wall_time_seconds"] = seconds;
  j["estimates"] = path.filename().string();

  write_atomic(path, csv);
  write_atomic(sidecar, j.dump(2) + "\n");
  std::cout << "wrote " << design.users + design.items << " estimates to " << path.string() << " (" << fmt(seconds, 3)
            << " s)\n";
  return kExitOk;
}

struct CrossvalOptions {
  DataOptions data;
  std::string config;
  int folds = 10;
  std::uint64_t seed = 0;
  std::string estimators;
  std::vector<double> sigma2_grid;
  int gibbs_burn_in = 0;
  int gibbs_samples = 0;
  int threads = default_threads();
  OutputOptions out;
};

void print_cv_table(const CvResult& r) {
  std::printf("%-10s  %-17s  %-17s  %s\n", "estimator", "ACC", "AUC", "fit time/fold (s)");
  for (const auto& e : r.estimators) {
    double runtime = 0.0;
    int ok = 0;
    for (const auto& f : e.folds)
      if (f.error.empty()) {
        runtime += f.runtime_seconds;
        ++ok;
      }
    const std::string acc = fmt_fixed(e.acc_mean) + " +- " + fmt_fixed(e.acc_std);
    bool any_auc = false;
    for (const auto& f : e.folds) any_auc = any_auc || f.auc.has_value();
    const std::string auc = any_auc ? fmt_fixed(e.auc_mean) + " +- " + fmt_fixed(e.auc_std) : std::string("n/a");
    std::printf("%-10s  %-17s  %-17s  %s\n", to_string(e.estimator), acc.c_str(), auc.c_str(),
                ok ? fmt(runtime / ok, 3).c_str() : "n/a");
  }
  std::fflush(stdout);
  for (const auto& e : r.estimators)
    for (const auto& f : e.folds) {
      if (!f.error.empty()) std::cerr << "note: " << to_string(e.estimator) << " fold " << f.fold << ": " << f.error << "\n";
      else if (!f.auc)
        std::cerr << "note: " << to_string(e.estimator) << " fold " << f.fold
                  << ": held-out responses have a single class, AUC undefined\n";
    }
}

int run_crossval(const CrossvalOptions& o, const CLI::App& cmd) {
  const CvConfig c = checked_options([&] {
    CvConfig cfg;
    if (!o.config.empty()) cfg = cv_config_from_json(read_file(o.config));
    if (cmd.count("--folds")) cfg.folds = o.folds;
    if (cmd.count("--seed")) cfg.seed = o.seed;
    if (cmd.count("--estimators")) cfg.estimators = parse_estimators(o.estimators);
    if (cmd.count("--sigma2-grid")) cfg.prior_variance_grid = o.sigma2_grid;
    if (cmd.count("--gibbs-burnin")) cfg.gibbs_burn_in = o.gibbs_burn_in;
    if (cmd.count("--gibbs-samples")) cfg.gibbs_samples = o.gibbs_samples;
    cfg.threads = o.threads;
    cfg.validate();
    return cfg;
  });

  const ResponseSet data = load_data(o.data);
  const CvResult result = run_cross_validation(data, c);
  const bool json = o.out.format == "json";
  const fs::path path = o.out.resolve("crossval", o.out.format);
  write_atomic(path, json ? to_json(result) : to_csv(result));
  print_cv_table(result);
  std::cout << "wrote results to " << path.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear MMSE estimation for probit and Rasch models"};
  app.name("linprobit");
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", "linprobit " LINPROBIT_VERSION);

  // analyze
  AnalyzeOptions ao;
  auto* analyze = app.add_subcommand("analyze", "Closed-form MSE curves and Fisher lower bounds");
  analyze->add_option("--users", ao.users, "Comma-separated user counts")
                      ->delimiter(',')
                      ->check(kPositiveInt)
                      ->capture_default_str();
  auto* items_opt = analyze->add_option("--items", ao.items, "Comma-separated item counts")
                        ->delimiter(',')
                        ->check(kPositiveInt)
                        ->capture_default_str();
  auto* snr_opt = analyze->add_option("--snr-db", ao.snr_db, "Comma-separated SNR levels in dB (default -10,0,10)")
                      ->delimiter(',');
  auto* sigma_opt = analyze->add_option("--sigma2", ao.sigma2, "Comma-separated prior variances sigma2_x (>= 0)")
                        ->delimiter(',')
                        ->check(CLI::NonNegativeNumber);
  snr_opt->excludes(sigma_opt);
  analyze->add_flag("--known-difficulties", ao.known_difficulties,
                    "Treat item difficulties as known and analyze ability estimation per user");
  analyze->add_option("--difficulty-file", ao.difficulty_file, "Known difficulties, one number per line")
      ->check(CLI::ExistingFile);
  auto* dsig = analyze->add_option("--difficulty-sigma2", ao.difficulty_sigma2,
                                   "Place known difficulties at the normal quantiles of this variance")
                   ->check(CLI::PositiveNumber)
                   ->capture_default_str();
  add_output_flags(analyze, ao.out, true);

  // simulate
  SimulateOptions so;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo MSE study on synthetic Rasch data");
  simulate->add_option("--config", so.config, "JSON config; explicit flags override its values")
      ->check(CLI::ExistingFile);
  simulate->add_option("--users", so.users, "Comma-separated user counts (default 20,50,100)")
      ->delimiter(',')
      ->check(kPositiveInt);
  simulate->add_option("--items", so.items, "Comma-separated item counts (default 20,50,100)")
      ->delimiter(',')
      ->check(kPositiveInt);
  simulate->add_option("--snr-db", so.snr_db, "Comma-separated SNR levels in dB (default -10,0,10)")->delimiter(',');
  simulate->add_option("--trials", so.trials, "Random instances per cell (default 1000)")->check(kPositiveInt);
  simulate->add_option("--seed", so.seed, "Random seed (default 0)");
  simulate->add_option("--estimators", so.estimators,
                       "Comma-separated: lmmse, pm_gibbs, map, logit_map, fisher_bound, ls (default lmmse)");
  simulate->add_option("--gibbs-burnin", so.gibbs_burn_in, "Gibbs burn-in iterations (default 10000)")
      ->check(kNonNegativeInt);
  simulate->add_option("--gibbs-samples", so.gibbs_samples, "Gibbs samples kept (default 20000)")
      ->check(kPositiveInt);
  simulate->add_flag("--known-difficulties", so.known_difficulties,
                     "Draw difficulties from N(0, 1) and treat them as known");
  simulate->add_flag("--include-difficulties", so.include_difficulties,
                     "Average the error over difficulty components too");
  simulate->add_option("--threads", so.threads, "Worker threads")->check(kPositiveInt)->capture_default_str();
  add_output_flags(simulate, so.out, true);

  // fit
  FitCommandOptions fo;
  auto* fit = app.add_subcommand("fit", "Fit abilities and difficulties to a response data set");
  add_data_flags(fit, fo.data);
  fit->add_option("--estimator", fo.estimator, "lmmse, map, logit_map or pm_gibbs")
      ->check(CLI::IsMember({"lmmse", "map", "logit_map", "pm_gibbs"}))
      ->capture_default_str();
  fit->add_option("--sigma2", fo.sigma2, "Prior variance of abilities (and difficulties)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  fit->add_option("--sigma2-difficulty", fo.sigma2_difficulty, "Separate prior variance for difficulties")
      ->check(CLI::PositiveNumber);
  fit->add_option("--seed", fo.seed, "Gibbs seed")->capture_default_str();
  fit->add_option("--gibbs-burnin", fo.gibbs_burn_in, "Gibbs burn-in iterations")
      ->check(kNonNegativeInt)
      ->capture_default_str();
  fit->add_option("--gibbs-samples", fo.gibbs_samples, "Gibbs samples kept")
      ->check(kPositiveInt)
      ->capture_default_str();
  fit->add_flag("--with-mse", fo.with_mse,
                "Always compute the predicted MSE for lmmse (automatic up to 2000 parameters)");
  add_output_flags(fit, fo.out, false);

  // crossval
  CrossvalOptions co;
  auto* crossval = app.add_subcommand("crossval", "K-fold cross-validation of response prediction");
  add_data_flags(crossval, co.data);
  crossval->add_option("--config", co.config, "JSON config; explicit flags override its values")
      ->check(CLI::ExistingFile);
  crossval->add_option("--folds", co.folds, "Number of folds (default 10)")->check(CLI::Range(2, 1000000));
  crossval->add_option("--seed", co.seed, "Random seed for fold assignment (default 0)");
  crossval->add_option("--estimators", co.estimators,
                       "Comma-separated: lmmse, map, logit_map, pm_gibbs (default lmmse,map,logit_map)");
  crossval->add_option("--sigma2-grid", co.sigma2_grid, "Candidate prior variances (default 0.1,0.2,0.5,1,2,5)")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  crossval->add_option("--gibbs-burnin", co.gibbs_burn_in, "Gibbs burn-in iterations (default 10000)")
      ->check(kNonNegativeInt);
  crossval->add_option("--gibbs-samples", co.gibbs_samples, "Gibbs samples kept (default 20000)")
      ->check(kPositiveInt);
  crossval->add_option("--threads", co.threads, "Worker threads")->check(kPositiveInt)->capture_default_str();
  add_output_flags(crossval, co.out, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*analyze) return run_analyze(ao, items_opt->count() > 0, dsig->count() > 0);
    if (*simulate) return run_simulate(so, *simulate);
    if (*fit) return run_fit(fo);
    if (*crossval) return run_crossval(co, *crossval);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  }
  return kExitUsage;
}

