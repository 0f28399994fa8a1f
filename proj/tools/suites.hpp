#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tenet/tensor.hpp"

namespace tenet::cli {

struct Check {
  std::string name;
  bool pass = false;
  double residual = 0.0;
  double threshold = 0.0;
};

struct SuiteResult {
  std::string name;
  std::vector<Check> checks;
  double wall_time_ms = 0.0;
  bool pass() const;
};

struct SuiteOptions {
  std::uint64_t seed = 1;
  int eta = 7;
  double eta_prime = 200.0;
  double sigma = 0.5;
  /// Optional user tensor, exercised by the descriptors and tso suites.
  std::optional<DenseTensor> input;
};

const std::vector<std::string>& suite_names();

/// Runs one suite by name; "all" is handled by the caller.
SuiteResult run_suite(const std::string& name, const SuiteOptions& opts);

inline constexpr int kReportSchemaVersion = 1;

/// {"schema_version", "suites": [{"name", "pass", "wall_time_ms", "checks": [...]}], "pass"}
void write_report_json(std::ostream& out, const std::vector<SuiteResult>& results);
/// Header "suite,check,pass,residual,threshold".
void write_report_csv(std::ostream& out, const std::vector<SuiteResult>& results);

}  // namespace tenet::cli
