#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace spice {

enum class TreatmentKind { kContinuous, kBinary };

std::string to_string(TreatmentKind kind);
TreatmentKind treatment_kind_from_string(const std::string& s);

struct ColumnStats {
  double mean = 0.0;
  double sd = 1.0;
};

/// Per-column affine standardization record. Binary treatment columns keep
/// identity stats (mean 0, sd 1) and are never rescaled.
struct Standardization {
  std::vector<ColumnStats> w;
  std::vector<ColumnStats> x;
  ColumnStats y;
  std::vector<ColumnStats> u;
};

/// n i.i.d. rows of (W, X, Y), optionally with the hidden confounder U for
/// oracle use. Column counts: W is n x d, X is n x p, U is n x k.
struct Dataset {
  Eigen::MatrixXd w;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::MatrixXd u;  // 0 columns when the confounder is not recorded
  TreatmentKind treatment_kind = TreatmentKind::kContinuous;
  std::optional<Standardization> standardization;
  std::uint64_t seed = 0;
  std::string source = "custom";

  Eigen::Index n() const { return y.size(); }
  Eigen::Index d() const { return w.cols(); }
  Eigen::Index p() const { return x.cols(); }
  Eigen::Index k() const { return u.cols(); }
  bool has_hidden_confounder() const { return u.cols() > 0; }
  bool is_standardized() const { return standardization.has_value(); }
};

/// Standardizes every non-binary column to mean 0, sd 1 (unbiased sd).
/// Binary treatment columns pass through untouched. Throws DataError on a
/// zero-variance non-binary column.
Dataset standardize(const Dataset& data);

/// Inverse of standardize; exact up to floating-point roundoff.
Dataset destandardize(const Dataset& data);

/// Shortest decimal string that round-trips the double exactly.
std::string format_double(double v);

/// Writes rows as CSV with header w_1..w_d,x_1..x_p,y[,u_1..u_k], one value
/// per cell in round-trip decimal form.
void write_dataset_csv(const Dataset& data, const std::string& path,
                       bool include_u = true);

/// Reads a CSV in the same layout; column roles are taken from the header.
/// NaN/Inf cells are rejected with the offending coordinates.
Dataset read_dataset_csv(const std::string& path);

/// JSON sidecar recording source, seed, dims and standardization metadata.
void write_dataset_manifest(const Dataset& data, const std::string& path);

/// Restores metadata (treatment kind, seed, standardization) onto a dataset
/// read from CSV.
void apply_dataset_manifest(Dataset& data, const std::string& path);

}  // namespace spice
