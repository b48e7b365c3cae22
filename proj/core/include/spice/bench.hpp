#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spice/dataset.hpp"
#include "spice/spice_net.hpp"

namespace spice {

/// Benchmark-run configuration. `benchmark` holds a benchmark id
/// (A_gaussian, B_binary, C_exponential, D_highdim) or a path to an
/// external CSV; external runs report ACE per seed but no MSE, since no
/// ground-truth causal function is available.
struct RunConfig {
  std::string benchmark;
  std::vector<std::string> methods;
  Eigen::Index n_train = 2000;
  Eigen::Index n_test = 500;
  int repetitions = 20;
  std::uint64_t seed = 0;
  std::string overrides_json = "{}";  // per-method estimator overrides
  std::string mechanism_path;         // external data only; benchmarks derive it
  std::string out_dir = ".";
  int jobs = 0;  // 0 = hardware concurrency

  bool is_external() const;
  /// simulate needs no methods list; bench does.
  void validate(bool require_methods = true) const;
};

RunConfig run_config_from_json_string(const std::string& text);
RunConfig run_config_from_json_file(const std::string& path);

/// Flat estimator-config JSON: generator_epochs, generator_minibatches,
/// generator_lr, step2_epochs, step2_lr, step2_hidden, adjust_samples, seed.
EstimateConfig estimate_config_from_json_string(const std::string& text);

extern const std::vector<std::string> kBenchMethods;

struct BenchCell {
  int repetition = 0;
  std::uint64_t cell_seed = 0;
  bool ok = false;
  double mse = 0.0;
  double ace = 0.0;
  std::string error;
};

struct MethodSummary {
  std::string method;
  std::vector<BenchCell> cells;  // one per repetition
  double median_mse = 0.0;
  double sd_mse = 0.0;
  int failures = 0;
};

struct BenchReport {
  std::string benchmark;
  Eigen::Index n_train = 0;
  Eigen::Index n_test = 0;
  int repetitions = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  double wall_seconds = 0.0;  // excluded from determinism comparisons
  std::vector<MethodSummary> methods;
};

double median(std::vector<double> values);
double sample_sd(const std::vector<double>& values);

/// Writes train/test CSV pairs with manifests, one pair per repetition,
/// seeded deterministically from seed + repetition. Returns written paths.
std::vector<std::string> cmd_simulate(const RunConfig& cfg);

/// Runs every (method, repetition) cell, fully seeded per cell so
/// repetition-level parallelism cannot change results. A failing cell is
/// recorded and the rest of the grid continues.
BenchReport cmd_bench(const RunConfig& cfg);

struct IngestSchema {
  Eigen::Index d = 0;  // 0 = accept what the header declares
  Eigen::Index p = 0;
  Eigen::Index k = -1;  // -1 = any
  TreatmentKind treatment_kind = TreatmentKind::kContinuous;
};

/// Validates and loads an external CSV; writes a manifest sidecar next to
/// the returned dataset when manifest_out is non-empty.
Dataset cmd_ingest(const std::string& csv_path,
                   const std::optional<IngestSchema>& schema,
                   const std::string& manifest_out = "");

/// Merges per-seed values of several reports into one CSV table for
/// external plotting. All reports must share benchmark and sample sizes.
void cmd_report(const std::vector<std::string>& report_paths,
                const std::string& out_csv);

void write_report_json(const BenchReport& report, const std::string& path);
BenchReport read_report_json(const std::string& path);
std::string report_to_json_string(const BenchReport& report);
void write_report_csv(const BenchReport& report, const std::string& path);

}  // namespace spice
