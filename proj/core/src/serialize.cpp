#include "linprobit/serialize.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "linprobit/errors.hpp"

namespace linprobit {

namespace {

using nlohmann::ordered_json;

ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

ordered_json optional_number(const std::optional<double>& v) { return v ? number(*v) : ordered_json(nullptr); }

ordered_json estimator_list(const std::set<Estimator>& estimators) {
  ordered_json out = ordered_json::array();
  for (Estimator e : estimators) out.push_back(to_string(e));
  return out;
}

ordered_json config_json(const SyntheticConfig& c) {
  ordered_json j;
  j["users_grid"] = c.users_grid;
  j["items_grid"] = c.items_grid;
  j["snr_db_grid"] = c.snr_db_grid;
  j["trials"] = c.trials;
  j["estimators"] = estimator_list(c.estimators);
  j["seed"] = c.seed;
  j["known_difficulties"] = c.known_difficulties;
  j["include_difficulties"] = c.include_difficulties;
  j["gibbs_burn_in"] = c.gibbs_burn_in;
  j["gibbs_samples"] = c.gibbs_samples;
  return j;
}

ordered_json config_json(const CvConfig& c) {
  ordered_json j;
  j["folds"] = c.folds;
  j["seed"] = c.seed;
  j["prior_variance_grid"] = c.prior_variance_grid;
  j["estimators"] = estimator_list(c.estimators);
  j["gibbs_burn_in"] = c.gibbs_burn_in;
  j["gibbs_samples"] = c.gibbs_samples;
  return j;
}

std::string csv_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

// Reads known keys of `j` into the config through `apply`, rejecting others.
template <class Config, class Apply>
Config parse_config(const std::string& text, std::initializer_list<const char*> keys, Apply&& apply) {
  Config config;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw DomainError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      bool known = key == "schema_version";
      for (const char* k : keys) known = known || key == k;
      if (!known) throw DomainError("unknown config key '" + key + "'");
    }
    apply(j, config);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("invalid config: ") + e.what());
  }
  return config;
}

std::set<Estimator> estimators_from(const nlohmann::json& j) {
  std::set<Estimator> out;
  for (const auto& e : j) out.insert(parse_estimator(e.get<std::string>()));
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string to_json(const ExperimentResult& result, bool include_timing) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "synthetic";
  j["config"] = config_json(result.config);
  ordered_json cells = ordered_json::array();
  for (const CellResult& c : result.cells) {
    ordered_json cj;
    cj["U"] = c.users;
    cj["Q"] = c.items;
    cj["snr_db"] = number(c.snr_db);
    cj["sigma2_x"] = number(c.sigma2);
    cj["analytical_lmmse_mse"] = number(c.analytical_lmmse_mse);
    cj["predicted_lmmse_mse"] = optional_number(c.predicted_lmmse_mse);
    cj["asymptotic_mse"] = optional_number(c.asymptotic_mse);
    ordered_json ests = ordered_json::object();
    for (const EstimatorStats& s : c.estimators) {
      ordered_json ej;
      ej["mean"] = s.trials ? number(s.mean) : ordered_json(nullptr);
      ej["std_error"] = s.trials ? number(s.std_error) : ordered_json(nullptr);
      ej["trials"] = s.trials;
      ej["failures"] = s.failures;
      if (!s.first_error.empty()) ej["first_error"] = s.first_error;
      if (include_timing) ej["wall_time_seconds"] = number(s.wall_time_seconds);
      ests[to_string(s.estimator)] = std::move(ej);
    }
    cj["estimators"] = std::move(ests);
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

std::string to_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "schema_version,U,Q,snr_db,sigma2_x,analytical_lmmse_mse,predicted_lmmse_mse,asymptotic_mse";
  for (Estimator e : result.config.estimators) {
    const std::string n = to_string(e);
    out << ',' << n << "_mean," << n << "_stderr," << n << "_trials," << n << "_failures";
  }
  out << '\n';
  for (const CellResult& c : result.cells) {
    out << kSchemaVersion << ',' << c.users << ',' << c.items << ',' << format_double(c.snr_db) << ','
        << format_double(c.sigma2) << ',' << format_double(c.analytical_lmmse_mse) << ','
        << csv_cell(c.predicted_lmmse_mse) << ',' << csv_cell(c.asymptotic_mse);
    for (Estimator e : result.config.estimators) {
      const EstimatorStats* s = c.find(e);
      if (s && s->trials) out << ',' << format_double(s->mean) << ',' << format_double(s->std_error);
      else out << ",,";
      out << ',' << (s ? s->trials : 0) << ',' << (s ? s->failures : 0);
    }
    out << '\n';
  }
  return out.str();
}

std::string to_json(const CvResult& result) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "crossval";
  j["config"] = config_json(result.config);
  j["observations"] = result.observations;
  j["users"] = result.users;
  j["items"] = result.items;
  ordered_json ests = ordered_json::array();
  for (const CvEstimatorResult& r : result.estimators) {
    ordered_json ej;
    ej["estimator"] = to_string(r.estimator);
    ej["acc_mean"] = number(r.acc_mean);
    ej["acc_std"] = number(r.acc_std);
    ej["auc_mean"] = number(r.auc_mean);
    ej["auc_std"] = number(r.auc_std);
    ordered_json folds = ordered_json::array();
    for (const FoldRecord& f : r.folds) {
      ordered_json fj;
      fj["fold"] = f.fold;
      fj["selected_sigma2_x"] = number(f.selected_sigma2);
      fj["accuracy"] = number(f.accuracy);
      fj["auc"] = optional_number(f.auc);
      fj["runtime_seconds"] = number(f.runtime_seconds);
      fj["cold_users"] = f.cold_users;
      fj["cold_items"] = f.cold_items;
      if (!f.error.empty()) fj["error"] = f.error;
      folds.push_back(std::move(fj));
    }
    ej["folds"] = std::move(folds);
    ests.push_back(std::move(ej));
  }
  j["estimators"] = std::move(ests);
  return j.dump(2) + "\n";
}

std::string to_csv(const CvResult& result) {
  std::ostringstream out;
  out << "schema_version,estimator,fold,selected_sigma2_x,accuracy,auc,runtime_seconds,cold_users,cold_items,error\n";
  for (const CvEstimatorResult& r : result.estimators)
    for (const FoldRecord& f : r.folds) {
      std::string err = f.error;
      for (char& ch : err)
        if (ch == ',' || ch == '\n') ch = ';';
      out << kSchemaVersion << ',' << to_string(r.estimator) << ',' << f.fold << ','
          << (f.error.empty() ? format_double(f.selected_sigma2) : "") << ','
          << (f.error.empty() ? format_double(f.accuracy) : "") << ',' << csv_cell(f.auc) << ','
          << format_double(f.runtime_seconds) << ',' << f.cold_users << ',' << f.cold_items << ',' << err << '\n';
    }
  return out.str();
}

std::string to_json(const SyntheticConfig& config) {
  ordered_json j = config_json(config);
  j["schema_version"] = kSchemaVersion;
  return j.dump(2) + "\n";
}

std::string to_json(const CvConfig& config) {
  ordered_json j = config_json(config);
  j["schema_version"] = kSchemaVersion;
  return j.dump(2) + "\n";
}

SyntheticConfig synthetic_config_from_json(const std::string& text) {
  return parse_config<SyntheticConfig>(
      text,
      {"users_grid", "items_grid", "snr_db_grid", "trials", "estimators", "seed", "known_difficulties",
       "include_difficulties", "gibbs_burn_in", "gibbs_samples", "threads"},
      [](const nlohmann::json& j, SyntheticConfig& c) {
        if (j.contains("users_grid")) c.users_grid = j["users_grid"].get<std::vector<int>>();
        if (j.contains("items_grid")) c.items_grid = j["items_grid"].get<std::vector<int>>();
        if (j.contains("snr_db_grid")) c.snr_db_grid = j["snr_db_grid"].get<std::vector<double>>();
        if (j.contains("trials")) c.trials = j["trials"].get<int>();
        if (j.contains("estimators")) c.estimators = estimators_from(j["estimators"]);
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("known_difficulties")) c.known_difficulties = j["known_difficulties"].get<bool>();
        if (j.contains("include_difficulties")) c.include_difficulties = j["include_difficulties"].get<bool>();
        if (j.contains("gibbs_burn_in")) c.gibbs_burn_in = j["gibbs_burn_in"].get<int>();
        if (j.contains("gibbs_samples")) c.gibbs_samples = j["gibbs_samples"].get<int>();
        if (j.contains("threads")) c.threads = j["threads"].get<int>();
      });
}

CvConfig cv_config_from_json(const std::string& text) {
  return parse_config<CvConfig>(
      text,
      {"folds", "seed", "prior_variance_grid", "estimators", "gibbs_burn_in", "gibbs_samples", "threads"},
      [](const nlohmann::json& j, CvConfig& c) {
        if (j.contains("folds")) c.folds = j["folds"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("prior_variance_grid"))
          c.prior_variance_grid = j["prior_variance_grid"].get<std::vector<double>>();
        if (j.contains("estimators")) c.estimators = estimators_from(j["estimators"]);
        if (j.contains("gibbs_burn_in")) c.gibbs_burn_in = j["gibbs_burn_in"].get<int>();
        if (j.contains("gibbs_samples")) c.gibbs_samples = j["gibbs_samples"].get<int>();
        if (j.contains("threads")) c.threads = j["threads"].get<int>();
      });
}

}  // namespace linprobit
