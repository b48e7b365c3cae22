#include "spice/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include <nlohmann/json.hpp>

#include "spice/common.hpp"
#include "spice/discrete.hpp"
#include "spice/linear_gaussian.hpp"
#include "spice/scm.hpp"

namespace spice {

using nlohmann::json;

const std::vector<std::string> kBenchMethods = {
    "spice_net",      "spice_net_approx",         "adj_u", "adj_w",
    "no_adj",         "linear_gaussian_corrected", "discrete_matrix_adjust"};

bool RunConfig::is_external() const {
  if (benchmark.empty()) return false;
  try {
    benchmark_id_from_string(benchmark);
    return false;
  } catch (const ConfigError&) {
    return true;
  }
}

void RunConfig::validate(bool require_methods) const {
  if (benchmark.empty()) throw ConfigError("config needs a benchmark or CSV path");
  if (require_methods && methods.empty()) {
    throw ConfigError("config needs a non-empty methods list");
  }
  for (const auto& m : methods) {
    if (std::find(kBenchMethods.begin(), kBenchMethods.end(), m) ==
        kBenchMethods.end()) {
      throw ConfigError("unknown method in config: " + m);
    }
  }
  if (n_train < 2) throw ConfigError("n_train must be at least 2");
  if (n_test < 1) throw ConfigError("n_test must be at least 1");
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
}

RunConfig run_config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config JSON: ") + e.what());
  }
  RunConfig cfg;
  cfg.benchmark = j.value("benchmark", std::string());
  cfg.methods = j.value("methods", std::vector<std::string>{});
  cfg.n_train = j.value("n_train", Eigen::Index{2000});
  cfg.n_test = j.value("n_test", Eigen::Index{500});
  cfg.repetitions = j.value("repetitions", 20);
  cfg.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("overrides")) cfg.overrides_json = j.at("overrides").dump();
  cfg.mechanism_path = j.value("mechanism", std::string());
  cfg.out_dir = j.value("out_dir", std::string("."));
  cfg.jobs = j.value("jobs", 0);
  return cfg;
}

RunConfig run_config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return run_config_from_json_string(text);
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty set");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double sample_sd(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

namespace {

std::uint64_t config_hash(const RunConfig& cfg) {
  std::string key = cfg.benchmark + "|" + std::to_string(cfg.n_train) + "|" +
                    std::to_string(cfg.n_test) + "|" +
                    std::to_string(cfg.repetitions) + "|" +
                    std::to_string(cfg.seed) + "|" + cfg.overrides_json + "|" +
                    cfg.mechanism_path;
  for (const auto& m : cfg.methods) key += "|" + m;
  return fnv1a64(key);
}

void apply_estimate_overrides(EstimateConfig& cfg, const json& o) {
  if (o.contains("generator_epochs")) {
    cfg.generator.epochs = o.at("generator_epochs").get<int>();
  }
  if (o.contains("generator_minibatches")) {
    cfg.generator.minibatch_count = o.at("generator_minibatches").get<int>();
  }
  if (o.contains("generator_lr")) {
    cfg.generator.initial_lr = o.at("generator_lr").get<double>();
  }
  if (o.contains("step2_epochs")) {
    cfg.step2.train.epochs = o.at("step2_epochs").get<int>();
  }
  if (o.contains("step2_lr")) {
    cfg.step2.train.initial_lr = o.at("step2_lr").get<double>();
  }
  if (o.contains("step2_hidden")) {
    cfg.step2.hidden_width = o.at("step2_hidden").get<int>();
  }
  if (o.contains("adjust_samples")) {
    cfg.adjust_samples = o.at("adjust_samples").get<int>();
  }
  if (o.contains("seed")) cfg.seed = o.at("seed").get<std::uint64_t>();
}

/// Per-method estimator overrides from the config's "overrides" object.
/// Keys under "*" apply to every method, method-named keys override those.
EstimateConfig apply_overrides(const std::string& overrides_json,
                               const std::string& method,
                               std::uint64_t cell_seed) {
  EstimateConfig cfg;
  json all = json::parse(overrides_json);
  if (all.contains("*")) apply_estimate_overrides(cfg, all.at("*"));
  if (all.contains(method)) apply_estimate_overrides(cfg, all.at(method));
  cfg.seed = cell_seed;
  return cfg;
}

ErrorMechanism benchmark_mechanism(BenchmarkId id) {
  const PcScmSpec spec = benchmark_spec(id);
  ErrorMechanism mech;
  mech.kind = ErrorMechanism::Kind::kAdditive;
  mech.e_density = spec.noise_e;
  if (id == BenchmarkId::kDHighdim) {
    mech.a.resize(3, 2);
    mech.a << 1, 1, 0, 1, 1, 0;
  } else {
    mech.a = Eigen::MatrixXd::Identity(1, 1);
  }
  return mech;
}

double mechanism_error_variance(const ErrorMechanism& mech) {
  switch (mech.e_density.family()) {
    case NoiseFamily::kGaussian:
      return mech.e_density.scale() * mech.e_density.scale();
    case NoiseFamily::kExponential: {
      const double rate = mech.e_density.rate();
      return 1.0 / (rate * rate);
    }
    case NoiseFamily::kMultivariateGaussian:
      throw ConfigError(
          "linear_gaussian_corrected requires a univariate error mechanism");
  }
  throw ConfigError("unknown mechanism family");
}

/// The corrected linear estimator as a causal function: the deconfounded
/// regression line through the sample means.
CausalEstimate linear_corrected_estimate(const Dataset& train,
                                         const ErrorMechanism& mech,
                                         std::uint64_t cell_seed) {
  const SecondMoments moments = empirical_moments(train);
  const double slope = corrected_estimator(moments, mechanism_error_variance(mech));
  const double x_bar = train.x.col(0).mean();
  const double y_bar = train.y.mean();
  Provenance prov{"linear_gaussian_corrected", 0, cell_seed};
  return CausalEstimate(
      [slope, x_bar, y_bar](double x) { return y_bar + slope * (x - x_bar); },
      train.treatment_kind, std::move(prov), train.x.col(0).minCoeff(),
      train.x.col(0).maxCoeff());
}

constexpr int kMaxDiscreteLevels = 64;

/// Matrix adjustment on discrete data: empirical joint over (W, X, Y),
/// effect restoration through the known F, then discrete G-computation.
CausalEstimate discrete_adjust_estimate(const Dataset& train,
                                        const std::string& mechanism_path,
                                        std::uint64_t cell_seed) {
  if (mechanism_path.empty()) {
    throw ConfigError("discrete_matrix_adjust requires a mechanism file");
  }
  if (train.d() != 1) {
    throw ConfigError("discrete_matrix_adjust expects a univariate proxy");
  }
  std::vector<double> w(train.w.col(0).data(), train.w.col(0).data() + train.n());
  std::vector<double> x(train.x.col(0).data(), train.x.col(0).data() + train.n());
  std::vector<double> y(train.y.data(), train.y.data() + train.n());
  DiscreteJoint joint = empirical_joint(w, x, y);
  if (joint.nv() > kMaxDiscreteLevels || joint.nx() > kMaxDiscreteLevels ||
      joint.ny() > kMaxDiscreteLevels) {
    throw DataError("discrete_matrix_adjust requires discrete data "
                    "(too many distinct levels)");
  }
  const DiscreteMechanism mech = read_mechanism_json(mechanism_path);
  auto joint_u = std::make_shared<DiscreteJoint>(matrix_adjust(joint, mech));
  Provenance prov{"discrete_matrix_adjust", 0, cell_seed};
  return CausalEstimate(
      [joint_u](double x0) { return causal_function_discrete(*joint_u, x0); },
      train.treatment_kind, std::move(prov), joint.x_support.front(),
      joint.x_support.back());
}

struct CellTask {
  size_t method_index;
  int repetition;
};

}  // namespace

EstimateConfig estimate_config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid estimator config JSON: ") + e.what());
  }
  EstimateConfig cfg;
  apply_estimate_overrides(cfg, j);
  return cfg;
}

std::vector<std::string> cmd_simulate(const RunConfig& cfg) {
  cfg.validate(/*require_methods=*/false);
  if (cfg.is_external()) {
    throw ConfigError("simulate requires a benchmark id, not a CSV path");
  }
  const BenchmarkId id = benchmark_id_from_string(cfg.benchmark);
  const PcScmSpec spec = benchmark_spec(id);
  std::filesystem::create_directories(cfg.out_dir);
  std::vector<std::string> written;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const std::uint64_t rep_seed = cfg.seed + static_cast<std::uint64_t>(rep);
    const Dataset train =
        sample_dataset(spec, cfg.n_train, derive_seed(rep_seed, "train"));
    const Dataset test =
        sample_dataset(spec, cfg.n_test, derive_seed(rep_seed, "test"));
    const std::pair<std::string, const Dataset*> splits[] = {
        {"train", &train}, {"test", &test}};
    for (const auto& [tag, data] : splits) {
      const std::string base = cfg.out_dir + "/" + cfg.benchmark + "_" + tag +
                               "_rep" + std::to_string(rep);
      write_dataset_csv(*data, base + ".csv");
      write_dataset_manifest(*data, base + ".manifest.json");
      written.push_back(base + ".csv");
      written.push_back(base + ".manifest.json");
    }
  }
  return written;
}

BenchReport cmd_bench(const RunConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const bool external = cfg.is_external();
  std::optional<BenchmarkId> id;
  PcScmSpec spec;
  std::optional<ErrorMechanism> mech;
  Dataset external_data;
  if (external) {
    external_data = read_dataset_csv(cfg.benchmark);
    const std::string manifest =
        cfg.benchmark.substr(0, cfg.benchmark.rfind(".csv")) + ".manifest.json";
    if (std::filesystem::exists(manifest)) {
      apply_dataset_manifest(external_data, manifest);
    }
    if (!cfg.mechanism_path.empty()) {
      std::ifstream probe(cfg.mechanism_path);
      json j;
      probe >> j;
      if (!j.contains("matrix")) {
        mech = read_error_mechanism_json(cfg.mechanism_path);
      }
    }
  } else {
    id = benchmark_id_from_string(cfg.benchmark);
    spec = benchmark_spec(*id);
    mech = benchmark_mechanism(*id);
  }

  BenchReport report;
  report.benchmark = cfg.benchmark;
  report.n_train = cfg.n_train;
  report.n_test = cfg.n_test;
  report.repetitions = cfg.repetitions;
  report.seed = cfg.seed;
  report.config_hash = config_hash(cfg);
  report.methods.resize(cfg.methods.size());
  for (size_t m = 0; m < cfg.methods.size(); ++m) {
    report.methods[m].method = cfg.methods[m];
    report.methods[m].cells.resize(static_cast<size_t>(cfg.repetitions));
  }

  std::vector<CellTask> tasks;
  for (size_t m = 0; m < cfg.methods.size(); ++m) {
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      tasks.push_back(CellTask{m, rep});
    }
  }

  auto run_cell = [&](const CellTask& task) {
    const std::string& method = cfg.methods[task.method_index];
    const std::uint64_t rep_seed =
        cfg.seed + static_cast<std::uint64_t>(task.repetition);
    BenchCell cell;
    cell.repetition = task.repetition;
    cell.cell_seed = derive_seed(rep_seed, method);
    try {
      Dataset train;
      std::vector<double> test_x;
      if (external) {
        train = external_data;
      } else {
        train = sample_dataset(spec, cfg.n_train, derive_seed(rep_seed, "train"));
        const Dataset test =
            sample_dataset(spec, cfg.n_test, derive_seed(rep_seed, "test"));
        test_x.assign(test.x.col(0).data(), test.x.col(0).data() + test.n());
      }

      CausalEstimate est = [&]() -> CausalEstimate {
        if (method == "linear_gaussian_corrected") {
          if (!mech) {
            throw ConfigError(
                "linear_gaussian_corrected needs an additive mechanism");
          }
          return linear_corrected_estimate(train, *mech, cell.cell_seed);
        }
        if (method == "discrete_matrix_adjust") {
          return discrete_adjust_estimate(train, cfg.mechanism_path,
                                          cell.cell_seed);
        }
        const EstimateConfig est_cfg =
            apply_overrides(cfg.overrides_json, method, cell.cell_seed);
        return estimate(method_from_string(method), train, mech, est_cfg);
      }();

      if (!external) {
        cell.mse = mse_eval(est, *id, test_x);
      } else {
        cell.mse = std::numeric_limits<double>::quiet_NaN();
      }
      const double h =
          train.treatment_kind == TreatmentKind::kBinary
              ? 0.0
              : std::max(1e-6, 0.05 * (train.x.col(0).maxCoeff() -
                                       train.x.col(0).minCoeff()));
      cell.ace = ace(est, train, h).value;
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
    report.methods[task.method_index].cells[static_cast<size_t>(task.repetition)] =
        std::move(cell);
  };

  // Embarrassingly parallel over cells; per-cell seeds make the result
  // independent of scheduling.
  unsigned jobs = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs)
                               : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size()));
  if (jobs <= 1) {
    for (const auto& task : tasks) run_cell(task);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (unsigned t = 0; t < jobs; ++t) {
      workers.emplace_back([&]() {
        for (;;) {
          const size_t i = next.fetch_add(1);
          if (i >= tasks.size()) return;
          run_cell(tasks[i]);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  for (auto& summary : report.methods) {
    std::vector<double> ok_values;
    for (const auto& cell : summary.cells) {
      if (cell.ok && std::isfinite(cell.mse)) ok_values.push_back(cell.mse);
      if (!cell.ok) ++summary.failures;
    }
    if (!ok_values.empty()) {
      summary.median_mse = median(ok_values);
      summary.sd_mse = sample_sd(ok_values);
    } else {
      summary.median_mse = std::numeric_limits<double>::quiet_NaN();
      summary.sd_mse = std::numeric_limits<double>::quiet_NaN();
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

Dataset cmd_ingest(const std::string& csv_path,
                   const std::optional<IngestSchema>& schema,
                   const std::string& manifest_out) {
  Dataset data = read_dataset_csv(csv_path);
  if (schema) {
    if (schema->d > 0 && data.d() != schema->d) {
      throw DataError("schema mismatch: expected " + std::to_string(schema->d) +
                      " proxy columns, found " + std::to_string(data.d()));
    }
    if (schema->p > 0 && data.p() != schema->p) {
      throw DataError("schema mismatch: expected " + std::to_string(schema->p) +
                      " treatment columns, found " + std::to_string(data.p()));
    }
    if (schema->k >= 0 && data.k() != schema->k) {
      throw DataError("schema mismatch: expected " + std::to_string(schema->k) +
                      " confounder columns, found " + std::to_string(data.k()));
    }
    data.treatment_kind = schema->treatment_kind;
  }
  data.source = csv_path;
  if (!manifest_out.empty()) write_dataset_manifest(data, manifest_out);
  return data;
}

namespace {

json cell_to_json(const BenchCell& cell) {
  json j{{"repetition", cell.repetition},
         {"cell_seed", cell.cell_seed},
         {"ok", cell.ok}};
  if (cell.ok) {
    if (std::isfinite(cell.mse)) j["mse"] = cell.mse;
    j["ace"] = cell.ace;
  } else {
    j["error"] = cell.error;
  }
  return j;
}

BenchCell cell_from_json(const json& j) {
  BenchCell cell;
  cell.repetition = j.at("repetition").get<int>();
  cell.cell_seed = j.at("cell_seed").get<std::uint64_t>();
  cell.ok = j.at("ok").get<bool>();
  if (cell.ok) {
    cell.mse = j.contains("mse") ? j.at("mse").get<double>()
                                 : std::numeric_limits<double>::quiet_NaN();
    cell.ace = j.value("ace", 0.0);
  } else {
    cell.error = j.value("error", std::string());
  }
  return cell;
}

json report_to_json(const BenchReport& report) {
  json methods = json::array();
  for (const auto& summary : report.methods) {
    json cells = json::array();
    for (const auto& cell : summary.cells) cells.push_back(cell_to_json(cell));
    json m{{"method", summary.method},
           {"cells", cells},
           {"failures", summary.failures}};
    if (std::isfinite(summary.median_mse)) {
      m["median_mse"] = summary.median_mse;
      m["sd_mse"] = summary.sd_mse;
    }
    methods.push_back(m);
  }
  return json{{"benchmark", report.benchmark},
              {"n_train", report.n_train},
              {"n_test", report.n_test},
              {"repetitions", report.repetitions},
              {"seed", report.seed},
              {"config_hash", report.config_hash},
              {"wall_seconds", report.wall_seconds},
              {"methods", methods}};
}

}  // namespace

std::string report_to_json_string(const BenchReport& report) {
  return report_to_json(report).dump(2);
}

void write_report_json(const BenchReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << report_to_json_string(report) << "\n";
}

BenchReport read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("invalid report JSON " + path + ": " + e.what());
  }
  BenchReport report;
  report.benchmark = j.at("benchmark").get<std::string>();
  report.n_train = j.at("n_train").get<Eigen::Index>();
  report.n_test = j.at("n_test").get<Eigen::Index>();
  report.repetitions = j.at("repetitions").get<int>();
  report.seed = j.at("seed").get<std::uint64_t>();
  report.config_hash = j.at("config_hash").get<std::uint64_t>();
  report.wall_seconds = j.value("wall_seconds", 0.0);
  for (const auto& m : j.at("methods")) {
    MethodSummary summary;
    summary.method = m.at("method").get<std::string>();
    for (const auto& c : m.at("cells")) {
      summary.cells.push_back(cell_from_json(c));
    }
    summary.failures = m.value("failures", 0);
    summary.median_mse = m.contains("median_mse")
                             ? m.at("median_mse").get<double>()
                             : std::numeric_limits<double>::quiet_NaN();
    summary.sd_mse = m.contains("sd_mse")
                         ? m.at("sd_mse").get<double>()
                         : std::numeric_limits<double>::quiet_NaN();
    report.methods.push_back(std::move(summary));
  }
  return report;
}

void write_report_csv(const BenchReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "benchmark,method,repetition,cell_seed,ok,mse,ace,error\n";
  for (const auto& summary : report.methods) {
    for (const auto& cell : summary.cells) {
      out << report.benchmark << "," << summary.method << ","
          << cell.repetition << "," << cell.cell_seed << ","
          << (cell.ok ? 1 : 0) << ",";
      if (cell.ok && std::isfinite(cell.mse)) out << format_double(cell.mse);
      out << ",";
      if (cell.ok) out << format_double(cell.ace);
      out << "," << cell.error << "\n";
    }
  }
}

void cmd_report(const std::vector<std::string>& report_paths,
                const std::string& out_csv) {
  if (report_paths.empty()) {
    throw ConfigError("report merge needs at least one report");
  }
  std::vector<BenchReport> reports;
  for (const auto& path : report_paths) {
    reports.push_back(read_report_json(path));
  }
  for (size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].benchmark != reports[0].benchmark ||
        reports[i].n_train != reports[0].n_train ||
        reports[i].n_test != reports[0].n_test) {
      throw ConfigError("incompatible reports: benchmark or sample sizes differ");
    }
  }
  std::ofstream out(out_csv);
  if (!out) throw DataError("cannot open for writing: " + out_csv);
  out << "benchmark,method,repetition,cell_seed,mse\n";
  for (const auto& report : reports) {
    for (const auto& summary : report.methods) {
      for (const auto& cell : summary.cells) {
        if (!cell.ok || !std::isfinite(cell.mse)) continue;
        out << report.benchmark << "," << summary.method << ","
            << cell.repetition << "," << cell.cell_seed << ","
            << format_double(cell.mse) << "\n";
      }
    }
  }
}

}  // namespace spice
