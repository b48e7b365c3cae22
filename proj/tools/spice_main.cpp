// spice: single-proxy causal-effect identification and estimation.
//
// Subcommands: simulate, bench, estimate, ingest, report, check-mechanism,
// linear-gaussian. Exit codes: 0 success, 2 configuration error, 3 data
// error, 4 numeric failure.

#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "spice/bench.hpp"
#include "spice/common.hpp"
#include "spice/discrete.hpp"
#include "spice/fourier.hpp"
#include "spice/linear_gaussian.hpp"
#include "spice/scm.hpp"
#include "spice/spice_net.hpp"

namespace {

using nlohmann::json;
using namespace spice;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("invalid JSON " + path + ": " + e.what());
  }
  return j;
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot open for writing: " + out_path);
  out << j.dump(2) << "\n";
}

DensitySpec parse_density(const json& j) {
  DensitySpec spec;
  const auto family = j.at("family").get<std::string>();
  if (family == "gaussian") {
    spec.family = DensityFamily::kGaussian;
    spec.loc = j.value("loc", 0.0);
    spec.scale = j.value("scale", 1.0);
  } else if (family == "laplace") {
    spec.family = DensityFamily::kLaplace;
    spec.loc = j.value("loc", 0.0);
    spec.scale = j.value("scale", 1.0);
  } else if (family == "exponential") {
    spec.family = DensityFamily::kExponential;
    spec.rate = j.value("rate", 1.0);
  } else if (family == "uniform") {
    spec.family = DensityFamily::kUniform;
    spec.lo = j.value("lo", -1.0);
    spec.hi = j.value("hi", 1.0);
  } else if (family == "gaussian_mixture") {
    spec.family = DensityFamily::kGaussianMixture;
    spec.weights = j.at("weights").get<std::vector<double>>();
    spec.locs = j.at("locs").get<std::vector<double>>();
    spec.scales = j.at("scales").get<std::vector<double>>();
  } else {
    throw ConfigError("unknown density family: " + family);
  }
  spec.validate();
  return spec;
}

int run_simulate(const RunConfig& cfg) {
  const auto written = cmd_simulate(cfg);
  json j{{"written", written}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_bench(const std::string& config_path, const std::string& out_json,
              const std::string& out_csv, int jobs) {
  RunConfig cfg = run_config_from_json_file(config_path);
  if (jobs > 0) cfg.jobs = jobs;
  const BenchReport report = cmd_bench(cfg);
  if (!out_json.empty()) {
    write_report_json(report, out_json);
  } else {
    std::cout << report_to_json_string(report) << "\n";
  }
  if (!out_csv.empty()) write_report_csv(report, out_csv);
  return 0;
}

int run_estimate(const std::string& method_name, const std::string& data_path,
                 const std::string& mechanism_path,
                 const std::string& config_path, const std::string& test_path,
                 const std::string& out_path, double ace_h) {
  const Method method = method_from_string(method_name);
  Dataset data = read_dataset_csv(data_path);
  const std::string manifest =
      data_path.substr(0, data_path.rfind(".csv")) + ".manifest.json";
  if (std::ifstream(manifest).good()) apply_dataset_manifest(data, manifest);

  EstimateConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config: " + config_path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    cfg = estimate_config_from_json_string(text);
  }

  std::optional<ErrorMechanism> mech;
  if (!mechanism_path.empty()) {
    const json probe = load_json(mechanism_path);
    if (!probe.contains("matrix")) {
      mech = read_error_mechanism_json(mechanism_path);
    }
  }

  EstimateDiagnostics diag;
  const CausalEstimate est = estimate(method, data, mech, cfg, &diag);

  std::vector<double> grid;
  if (!test_path.empty()) {
    const Dataset test = read_dataset_csv(test_path);
    grid.assign(test.x.col(0).data(), test.x.col(0).data() + test.n());
  } else if (data.treatment_kind == TreatmentKind::kBinary) {
    grid = {0.0, 1.0};
  } else {
    const double lo = est.hull_lo();
    const double hi = est.hull_hi();
    for (int i = 0; i < 20; ++i) {
      grid.push_back(lo + (hi - lo) * static_cast<double>(i) / 19.0);
    }
  }

  json grid_json = json::array();
  for (double x : grid) {
    const auto eval = est.evaluate_checked(x);
    grid_json.push_back(json{
        {"x", x}, {"theta", eval.value}, {"extrapolated", eval.extrapolated}});
  }

  const double h =
      data.treatment_kind == TreatmentKind::kBinary
          ? 0.0
          : (ace_h > 0.0 ? ace_h
                         : 0.05 * (data.x.col(0).maxCoeff() -
                                   data.x.col(0).minCoeff()));
  const AceResult ace_res = ace(est, data, h);

  json out{{"method", method_name},
           {"grid", grid_json},
           {"ace", ace_res.value},
           {"ace_extrapolated", ace_res.extrapolated},
           {"provenance",
            {{"method", est.provenance().method},
             {"config_hash", est.provenance().config_hash},
             {"seed", est.provenance().seed}}}};
  if (method == Method::kSpiceNet || method == Method::kSpiceNetApprox) {
    out["generator_final_energy_loss"] = diag.generator_final_loss;
    out["fit_score_note"] =
        "final energy loss is a heuristic fit score, not a guarantee";
  }
  if (diag.learned_head) {
    json head;
    switch (diag.learned_head->family()) {
      case NoiseFamily::kGaussian:
        head = json{{"family", "gaussian"},
                    {"loc", diag.learned_head->effective_loc()},
                    {"scale", diag.learned_head->effective_scale()}};
        break;
      case NoiseFamily::kExponential:
        head = json{{"family", "exponential"},
                    {"rate", diag.learned_head->effective_rate()}};
        break;
      case NoiseFamily::kMultivariateGaussian: {
        const Eigen::VectorXd mean = diag.learned_head->effective_mean();
        const Eigen::MatrixXd cov = diag.learned_head->effective_covariance();
        json cov_rows = json::array();
        for (Eigen::Index i = 0; i < cov.rows(); ++i) {
          json row = json::array();
          for (Eigen::Index c = 0; c < cov.cols(); ++c) row.push_back(cov(i, c));
          cov_rows.push_back(row);
        }
        head = json{{"family", "multivariate_gaussian"},
                    {"mean", std::vector<double>(mean.data(),
                                                 mean.data() + mean.size())},
                    {"covariance", cov_rows}};
        break;
      }
    }
    out["learned_e_parameters"] = head;
  }
  emit(out, out_path);
  return 0;
}

int run_ingest(const std::string& data_path, Eigen::Index d, Eigen::Index p,
               Eigen::Index k, bool binary, const std::string& manifest_out) {
  std::optional<IngestSchema> schema;
  if (d > 0 || p > 0 || k >= 0 || binary) {
    IngestSchema s;
    s.d = d;
    s.p = p;
    s.k = k;
    s.treatment_kind = binary ? TreatmentKind::kBinary : TreatmentKind::kContinuous;
    schema = s;
  }
  const Dataset data = cmd_ingest(data_path, schema, manifest_out);
  json j{{"rows", data.n()},
         {"d", data.d()},
         {"p", data.p()},
         {"k", data.k()},
         {"treatment_kind", to_string(data.treatment_kind)}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_report(const std::vector<std::string>& paths, const std::string& out) {
  cmd_report(paths, out);
  // Comparison table on stdout.
  std::cout << "benchmark,method,median_mse,sd_mse,repetitions\n";
  for (const auto& path : paths) {
    const BenchReport report = read_report_json(path);
    for (const auto& summary : report.methods) {
      std::cout << report.benchmark << "," << summary.method << ","
                << summary.median_mse << "," << summary.sd_mse << ","
                << summary.cells.size() << "\n";
    }
  }
  return 0;
}

int run_check_mechanism(const std::string& density_path,
                        const std::string& mode, double t_lo, double t_hi,
                        double step, double floor, const std::string& out_path) {
  const json input = load_json(density_path);
  json out{{"mode", mode}};
  if (mode == "rank") {
    const DiscreteMechanism mech = read_mechanism_json(density_path);
    const RankCheckResult res = check_full_column_rank(mech);
    out["verdict"] =
        res.verdict == RankVerdict::kComplete ? "complete" : "not_complete";
    out["smallest_singular_value"] = res.smallest_singular_value;
    out["largest_singular_value"] = res.largest_singular_value;
    if (res.verdict != RankVerdict::kComplete) {
      out["reason"] = res.reason;
      if (res.null_space_witness.size() > 0) {
        out["null_space_witness"] = std::vector<double>(
            res.null_space_witness.data(),
            res.null_space_witness.data() + res.null_space_witness.size());
      }
    }
  } else if (mode == "fourier") {
    const DensitySpec density = parse_density(input);
    const ZeroScanResult res =
        scan_for_zeros(density, t_lo, t_hi, step, floor);
    out["family"] = density.family_name();
    out["verdict"] = res.verdict == ZeroScanVerdict::kNearZero ? "near_zero"
                                                               : "no_zero_found";
    out["min_magnitude"] = res.min_magnitude;
    out["argmin_t"] = res.argmin_t;
    out["floor"] = res.floor;
    out["note"] = "numerical evidence on a finite grid, not a proof";
    out["divisibility_catalog"] =
        infinite_divisibility_catalog(density.family_name()) ==
                Divisibility::kKnownInfinitelyDivisible
            ? "known_infinitely_divisible"
            : "unknown";
  } else if (mode == "witness") {
    const DensitySpec density = parse_density(input.at("density"));
    const double a = input.value("a", 2.0);
    std::vector<double> w_grid =
        input.value("w_grid", std::vector<double>{-1.0, 0.0, 1.0, 2.0});
    const std::string g_name = input.value("g", std::string("square"));
    std::function<double(double)> g;
    if (g_name == "square") {
      g = [](double u) { return u * u; };
    } else if (g_name == "identity") {
      g = [](double u) { return u; };
    } else {
      throw ConfigError("unknown witness map g: " + g_name);
    }
    const WitnessResult res = noninjective_witness(g, density, a, w_grid);
    out["g"] = g_name;
    out["max_abs"] = res.max_abs;
    out["argmax_w"] = res.argmax_w;
    out["note"] = "near-zero max witnesses a non-complete mechanism";
  } else {
    throw ConfigError("unknown mode: " + mode);
  }
  emit(out, out_path);
  return 0;
}

int run_linear_gaussian(const std::string& params_path, double sigma_e,
                        Eigen::Index n_draws, std::uint64_t seed,
                        const std::string& out_path) {
  const json p = load_json(params_path);
  LinearScmParams params;
  params.a_uw = p.value("a_uw", 1.0);
  params.a_ux = p.value("a_ux", 1.0);
  params.a_uy = p.value("a_uy", 1.0);
  params.a_xy = p.value("a_xy", 1.0);
  params.var_nu = p.value("var_nu", 1.0);
  params.var_e = p.value("var_e", 1.0);
  params.var_nx = p.value("var_nx", 1.0);
  params.var_ny = p.value("var_ny", 1.0);
  params.validate();
  const double var_e = sigma_e >= 0.0 ? sigma_e : params.var_e;

  const SecondMoments pop = population_covariance(params);
  json out{
      {"population",
       {{"coeff_adjust_u", ols_coeff_adjust_u(pop)},
        {"coeff_adjust_w", ols_coeff_adjust_w(pop)},
        {"bias_term", bias_term(params)},
        {"corrected", corrected_estimator(pop, var_e)}}},
      {"moments",
       {{"s_xx", pop.s_xx},
        {"s_ww", pop.s_ww},
        {"s_wx", pop.s_wx},
        {"s_wy", pop.s_wy},
        {"s_xy", pop.s_xy},
        {"s_uu", *pop.s_uu},
        {"s_ux", *pop.s_ux},
        {"s_uy", *pop.s_uy}}},
      {"sigma_e_squared", var_e},
  };
  if (n_draws > 0) {
    const Dataset data = sample_dataset(params.to_scm(), n_draws, seed);
    const SecondMoments emp = empirical_moments(data);
    out["monte_carlo"] = {{"n", n_draws},
                          {"coeff_adjust_u", ols_coeff_adjust_u(emp)},
                          {"coeff_adjust_w", ols_coeff_adjust_w(emp)},
                          {"corrected", corrected_estimator(emp, var_e)}};
  }
  emit(out, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-proxy causal-effect identification and estimation"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "write benchmark train/test CSVs");
  RunConfig sim_cfg;
  sim_cfg.repetitions = 1;
  sim->add_option("--benchmark", sim_cfg.benchmark,
                  "A_gaussian | B_binary | C_exponential | D_highdim")
      ->required();
  sim->add_option("--n-train", sim_cfg.n_train, "training rows");
  sim->add_option("--n-test", sim_cfg.n_test, "test rows");
  sim->add_option("--reps", sim_cfg.repetitions, "repetitions");
  sim->add_option("--seed", sim_cfg.seed, "base seed");
  sim->add_option("--out", sim_cfg.out_dir, "output directory")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "run a benchmark grid");
  std::string bench_config, bench_out, bench_csv;
  int bench_jobs = 0;
  bench->add_option("--config", bench_config, "run-config JSON")->required();
  bench->add_option("--out", bench_out, "report JSON path");
  bench->add_option("--csv", bench_csv, "per-cell CSV path");
  bench->add_option("--jobs", bench_jobs, "parallel cells (0 = hardware)");

  // estimate
  auto* est = app.add_subcommand("estimate", "run one estimator on a CSV");
  std::string est_method, est_data, est_mech, est_config, est_test, est_out;
  double est_ace_h = 0.0;
  est->add_option("--method", est_method,
                  "spice_net | spice_net_approx | adj_u | adj_w | no_adj")
      ->required();
  est->add_option("--data", est_data, "training CSV")->required();
  est->add_option("--mechanism", est_mech, "error-mechanism JSON");
  est->add_option("--config", est_config, "estimator-config JSON");
  est->add_option("--test", est_test, "test CSV providing the x grid");
  est->add_option("--out", est_out, "output JSON path");
  est->add_option("--ace-h", est_ace_h, "central-difference step for the ACE");

  // ingest
  auto* ing = app.add_subcommand("ingest", "validate an external CSV");
  std::string ing_data, ing_manifest;
  Eigen::Index ing_d = 0, ing_p = 0, ing_k = -1;
  bool ing_binary = false;
  ing->add_option("--data", ing_data, "CSV path")->required();
  ing->add_option("--w-cols", ing_d, "expected proxy columns");
  ing->add_option("--x-cols", ing_p, "expected treatment columns");
  ing->add_option("--u-cols", ing_k, "expected confounder columns");
  ing->add_flag("--binary", ing_binary, "treatment is binary");
  ing->add_option("--manifest", ing_manifest, "manifest output path");

  // report
  auto* rep = app.add_subcommand("report", "merge bench reports");
  std::vector<std::string> rep_paths;
  std::string rep_out;
  rep->add_option("reports", rep_paths, "report JSON paths")->required();
  rep->add_option("--out", rep_out, "merged per-seed CSV")->required();

  // check-mechanism
  auto* chk = app.add_subcommand("check-mechanism",
                                 "completeness and Fourier diagnostics");
  std::string chk_density, chk_mode, chk_out;
  double chk_tlo = -10.0, chk_thi = 10.0, chk_step = 0.01, chk_floor = 1e-8;
  chk->add_option("--density", chk_density, "density or mechanism JSON")
      ->required();
  chk->add_option("--mode", chk_mode, "rank | fourier | witness")->required();
  chk->add_option("--t-lo", chk_tlo, "scan lower bound");
  chk->add_option("--t-hi", chk_thi, "scan upper bound");
  chk->add_option("--step", chk_step, "scan step");
  chk->add_option("--floor", chk_floor, "near-zero floor");
  chk->add_option("--out", chk_out, "output JSON path");

  // linear-gaussian
  auto* lin = app.add_subcommand("linear-gaussian",
                                 "closed-form coefficients and bias");
  std::string lin_params, lin_out;
  double lin_sigma_e = -1.0;
  Eigen::Index lin_n = 0;
  std::uint64_t lin_seed = 0;
  lin->add_option("--params", lin_params, "LinearScmParams JSON")->required();
  lin->add_option("--sigma-e", lin_sigma_e, "known measurement error variance");
  lin->add_option("--n", lin_n, "Monte-Carlo draws (0 = none)");
  lin->add_option("--seed", lin_seed, "Monte-Carlo seed");
  lin->add_option("--out", lin_out, "output JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) return run_simulate(sim_cfg);
    if (*bench) return run_bench(bench_config, bench_out, bench_csv, bench_jobs);
    if (*est) {
      return run_estimate(est_method, est_data, est_mech, est_config, est_test,
                          est_out, est_ace_h);
    }
    if (*ing) {
      return run_ingest(ing_data, ing_d, ing_p, ing_k, ing_binary, ing_manifest);
    }
    if (*rep) return run_report(rep_paths, rep_out);
    if (*chk) {
      return run_check_mechanism(chk_density, chk_mode, chk_tlo, chk_thi,
                                 chk_step, chk_floor, chk_out);
    }
    if (*lin) {
      return run_linear_gaussian(lin_params, lin_sigma_e, lin_n, lin_seed,
                                 lin_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
