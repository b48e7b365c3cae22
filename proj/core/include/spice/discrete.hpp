#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace spice {

/// Known error mechanism for discrete confounders and proxies:
/// F(i, j) = p(W = w_i | U = u_j), an r x k matrix.
struct DiscreteMechanism {
  Eigen::MatrixXd matrix;
  std::vector<std::string> w_labels;
  std::vector<std::string> u_labels;

  Eigen::Index r() const { return matrix.rows(); }
  Eigen::Index k() const { return matrix.cols(); }

  /// Entry range and (when the full proxy support is present) column sums.
  void validate(bool require_stochastic_columns = true) const;
};

DiscreteMechanism read_mechanism_json(const std::string& path);
void write_mechanism_json(const DiscreteMechanism& mech, const std::string& path);

/// A joint probability table over finite supports of (V, X, Y), where V is
/// either the proxy W or the recovered confounder U. Indexed p[v][x][y].
struct DiscreteJoint {
  std::vector<double> v_support;  // numeric levels of W (or U after recovery)
  std::vector<double> x_support;
  std::vector<double> y_support;
  std::vector<double> table;  // row-major over (v, x, y)
  bool pseudo_inverse_used = false;  // set when a rectangular F was solved
                                     // by least squares

  Eigen::Index nv() const { return static_cast<Eigen::Index>(v_support.size()); }
  Eigen::Index nx() const { return static_cast<Eigen::Index>(x_support.size()); }
  Eigen::Index ny() const { return static_cast<Eigen::Index>(y_support.size()); }

  double& at(Eigen::Index v, Eigen::Index x, Eigen::Index y) {
    return table[static_cast<size_t>((v * nx() + x) * ny() + y)];
  }
  double at(Eigen::Index v, Eigen::Index x, Eigen::Index y) const {
    return table[static_cast<size_t>((v * nx() + x) * ny() + y)];
  }

  double total_mass() const;
  /// Nonnegativity and unit mass within tolerance.
  void validate(double tol = 1e-10) const;
};

/// Builds the empirical joint over (W, X, Y) from columns of discrete data.
/// Supports are the sorted distinct observed levels.
DiscreteJoint empirical_joint(const std::vector<double>& w,
                              const std::vector<double>& x,
                              const std::vector<double>& y);

DiscreteJoint read_joint_csv(const std::string& path);
void write_joint_csv(const DiscreteJoint& joint, const std::string& path);

enum class RankVerdict { kComplete, kNotComplete };

struct RankCheckResult {
  RankVerdict verdict = RankVerdict::kNotComplete;
  double smallest_singular_value = 0.0;
  double largest_singular_value = 0.0;
  std::string reason;
  /// A unit null-space direction delta with ||F delta|| ~ 0, when not complete.
  Eigen::VectorXd null_space_witness;
};

/// Full-column-rank completeness check: complete iff the smallest singular
/// value exceeds tol times the largest. r < k is reported as not complete
/// with reason "insufficient proxy support".
RankCheckResult check_full_column_rank(const DiscreteMechanism& mech,
                                       double tol = 1e-10);

/// Effect restoration: recovers p(U, X, Y) from p(W, X, Y) by solving
/// F p_U = p_W per (x, y) slice. Square F is solved exactly; r > k uses the
/// least-squares pseudo-inverse and flags the output. Recovered mass below
/// -eps_clip aborts with an inconsistency error; values in [-eps_clip, 0)
/// are clipped to zero and the slice renormalized to its original mass.
DiscreteJoint matrix_adjust(const DiscreteJoint& joint,
                            const DiscreteMechanism& mech,
                            double eps_clip = 1e-8, double rank_tol = 1e-10);

/// Forward composition: maps p(U, X, Y) through F to p(W, X, Y).
DiscreteJoint forward_mechanism(const DiscreteJoint& joint_u,
                                const DiscreteMechanism& mech);

/// theta(x) = sum_y y sum_u p(y | u, x) p(u) on a recovered joint over
/// (U, X, Y). Requires p(u, x) > 0 for every u at the queried level.
double causal_function_discrete(const DiscreteJoint& joint_u, double x_level);

/// theta(x_hi) - theta(x_lo) over the two levels of a binary treatment.
double ace_binary_discrete(const DiscreteJoint& joint_u);

}  // namespace spice
