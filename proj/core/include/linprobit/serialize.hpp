#pragma once

// JSON and CSV encodings of experiment results and configs. Every document
// carries a schema_version.

#include <string>

#include "linprobit/experiments.hpp"

namespace linprobit {

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Full result; include_timing=false drops wall times so the output depends
/// only on the config.
std::string to_json(const ExperimentResult& result, bool include_timing = true);
/// One row per cell, no wall times (byte-deterministic).
std::string to_csv(const ExperimentResult& result);

std::string to_json(const CvResult& result);
/// One row per (estimator, fold).
std::string to_csv(const CvResult& result);

std::string to_json(const SyntheticConfig& config);
std::string to_json(const CvConfig& config);

/// Missing keys keep their defaults; unknown keys and wrong types throw DomainError.
SyntheticConfig synthetic_config_from_json(const std::string& text);
CvConfig cv_config_from_json(const std::string& text);

}  // namespace linprobit
