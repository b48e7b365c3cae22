#include "spice/discrete.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spice/common.hpp"
#include "spice/dataset.hpp"

namespace spice {

using nlohmann::json;

void DiscreteMechanism::validate(bool require_stochastic_columns) const {
  if (r() < 1 || k() < 1) {
    throw ConfigError("mechanism matrix must be non-empty");
  }
  for (Eigen::Index i = 0; i < r(); ++i) {
    for (Eigen::Index j = 0; j < k(); ++j) {
      const double v = matrix(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError("mechanism entries must lie in [0, 1]");
      }
    }
  }
  if (require_stochastic_columns) {
    for (Eigen::Index j = 0; j < k(); ++j) {
      if (std::abs(matrix.col(j).sum() - 1.0) > 1e-10) {
        throw ConfigError("mechanism column " + std::to_string(j) +
                          " does not sum to 1");
      }
    }
  }
}

DiscreteMechanism read_mechanism_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open mechanism file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("invalid mechanism JSON " + path + ": " + e.what());
  }
  DiscreteMechanism mech;
  mech.u_labels = j.at("u_labels").get<std::vector<std::string>>();
  mech.w_labels = j.at("w_labels").get<std::vector<std::string>>();
  const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  if (r == 0) throw DataError("mechanism matrix is empty: " + path);
  const Eigen::Index k = static_cast<Eigen::Index>(rows[0].size());
  mech.matrix.resize(r, k);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != k) {
      throw DataError("ragged mechanism matrix: " + path);
    }
    for (Eigen::Index jj = 0; jj < k; ++jj) mech.matrix(i, jj) = rows[i][jj];
  }
  if (mech.w_labels.size() != static_cast<size_t>(r) ||
      mech.u_labels.size() != static_cast<size_t>(k)) {
    throw DataError("mechanism labels disagree with matrix shape: " + path);
  }
  return mech;
}

void write_mechanism_json(const DiscreteMechanism& mech,
                          const std::string& path) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < mech.r(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < mech.k(); ++j) row.push_back(mech.matrix(i, j));
    rows.push_back(row);
  }
  json j{{"u_labels", mech.u_labels},
         {"w_labels", mech.w_labels},
         {"matrix", rows}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

double DiscreteJoint::total_mass() const {
  double s = 0.0;
  for (double v : table) s += v;
  return s;
}

void DiscreteJoint::validate(double tol) const {
  if (table.size() !=
      static_cast<size_t>(nv()) * static_cast<size_t>(nx()) *
          static_cast<size_t>(ny())) {
    throw DataError("joint table size disagrees with supports");
  }
  for (double v : table) {
    if (!(v >= 0.0)) throw DataError("joint table has a negative entry");
  }
  if (std::abs(total_mass() - 1.0) > tol) {
    throw DataError("joint table mass differs from 1 beyond tolerance");
  }
}

namespace {

std::vector<double> sorted_levels(const std::vector<double>& values) {
  std::vector<double> levels = values;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

Eigen::Index level_index(const std::vector<double>& support, double v) {
  const auto it = std::lower_bound(support.begin(), support.end(), v);
  if (it == support.end() || *it != v) {
    throw DataError("value not in discrete support");
  }
  return static_cast<Eigen::Index>(it - support.begin());
}

}  // namespace

DiscreteJoint empirical_joint(const std::vector<double>& w,
                              const std::vector<double>& x,
                              const std::vector<double>& y) {
  if (w.size() != x.size() || x.size() != y.size() || w.empty()) {
    throw DataError("empirical_joint requires equal, non-empty columns");
  }
  DiscreteJoint joint;
  joint.v_support = sorted_levels(w);
  joint.x_support = sorted_levels(x);
  joint.y_support = sorted_levels(y);
  joint.table.assign(static_cast<size_t>(joint.nv()) *
                         static_cast<size_t>(joint.nx()) *
                         static_cast<size_t>(joint.ny()),
                     0.0);
  const double inc = 1.0 / static_cast<double>(w.size());
  for (size_t i = 0; i < w.size(); ++i) {
    joint.at(level_index(joint.v_support, w[i]),
             level_index(joint.x_support, x[i]),
             level_index(joint.y_support, y[i])) += inc;
  }
  return joint;
}

DiscreteJoint read_joint_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open joint table: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty joint table: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "w,x,y,prob") {
    throw DataError("joint table header must be 'w,x,y,prob': " + path);
  }
  std::vector<std::array<double, 4>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::array<double, 4> row{};
    for (int c = 0; c < 4; ++c) {
      if (!std::getline(ss, cell, ',')) {
        throw DataError("short row in joint table: " + path);
      }
      try {
        row[static_cast<size_t>(c)] = std::stod(cell);
      } catch (const std::exception&) {
        throw DataError("non-numeric cell '" + cell + "' in " + path);
      }
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw DataError("no rows in joint table: " + path);

  std::vector<double> ws, xs, ys;
  for (const auto& r : rows) {
    ws.push_back(r[0]);
    xs.push_back(r[1]);
    ys.push_back(r[2]);
  }
  DiscreteJoint joint;
  joint.v_support = sorted_levels(ws);
  joint.x_support = sorted_levels(xs);
  joint.y_support = sorted_levels(ys);
  joint.table.assign(static_cast<size_t>(joint.nv()) *
                         static_cast<size_t>(joint.nx()) *
                         static_cast<size_t>(joint.ny()),
                     0.0);
  for (const auto& r : rows) {
    joint.at(level_index(joint.v_support, r[0]),
             level_index(joint.x_support, r[1]),
             level_index(joint.y_support, r[2])) = r[3];
  }
  joint.validate(1e-8);
  return joint;
}

void write_joint_csv(const DiscreteJoint& joint, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "w,x,y,prob\n";
  for (Eigen::Index v = 0; v < joint.nv(); ++v) {
    for (Eigen::Index x = 0; x < joint.nx(); ++x) {
      for (Eigen::Index y = 0; y < joint.ny(); ++y) {
        out << format_double(joint.v_support[static_cast<size_t>(v)]) << ","
            << format_double(joint.x_support[static_cast<size_t>(x)]) << ","
            << format_double(joint.y_support[static_cast<size_t>(y)]) << ","
            << format_double(joint.at(v, x, y)) << "\n";
      }
    }
  }
}

RankCheckResult check_full_column_rank(const DiscreteMechanism& mech,
                                       double tol) {
  mech.validate(/*require_stochastic_columns=*/false);
  RankCheckResult res;
  if (mech.r() < mech.k()) {
    res.verdict = RankVerdict::kNotComplete;
    res.reason = "insufficient proxy support";
    return res;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      mech.matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  res.largest_singular_value = sv(0);
  res.smallest_singular_value = sv(sv.size() - 1);
  if (res.smallest_singular_value > tol * res.largest_singular_value) {
    res.verdict = RankVerdict::kComplete;
  } else {
    res.verdict = RankVerdict::kNotComplete;
    res.reason = "rank-deficient error mechanism";
    // Right-singular vector of the smallest singular value spans the
    // (numerical) null space: ||F delta|| = sigma_min.
    res.null_space_witness = svd.matrixV().col(sv.size() - 1);
  }
  return res;
}

DiscreteJoint forward_mechanism(const DiscreteJoint& joint_u,
                                const DiscreteMechanism& mech) {
  if (joint_u.nv() != mech.k()) {
    throw ConfigError("joint U-support size disagrees with mechanism columns");
  }
  DiscreteJoint out;
  out.v_support.resize(static_cast<size_t>(mech.r()));
  for (Eigen::Index i = 0; i < mech.r(); ++i) {
    out.v_support[static_cast<size_t>(i)] = static_cast<double>(i);
  }
  out.x_support = joint_u.x_support;
  out.y_support = joint_u.y_support;
  out.table.assign(static_cast<size_t>(mech.r()) *
                       static_cast<size_t>(out.nx()) *
                       static_cast<size_t>(out.ny()),
                   0.0);
  for (Eigen::Index x = 0; x < out.nx(); ++x) {
    for (Eigen::Index y = 0; y < out.ny(); ++y) {
      Eigen::VectorXd slice_u(mech.k());
      for (Eigen::Index u = 0; u < mech.k(); ++u) slice_u(u) = joint_u.at(u, x, y);
      const Eigen::VectorXd slice_w = mech.matrix * slice_u;
      for (Eigen::Index w = 0; w < mech.r(); ++w) out.at(w, x, y) = slice_w(w);
    }
  }
  return out;
}

DiscreteJoint matrix_adjust(const DiscreteJoint& joint,
                            const DiscreteMechanism& mech, double eps_clip,
                            double rank_tol) {
  if (joint.nv() != mech.r()) {
    throw ConfigError("joint W-support size disagrees with mechanism rows");
  }
  const RankCheckResult rank = check_full_column_rank(mech, rank_tol);
  if (rank.verdict != RankVerdict::kComplete) {
    throw NumericError("mechanism is not invertible at tolerance: " +
                       rank.reason);
  }
  const bool rectangular = mech.r() > mech.k();

  // Precompute one decomposition; reused across all (x, y) slices.
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  if (rectangular) {
    qr.compute(mech.matrix);
  } else {
    lu.compute(mech.matrix);
  }

  DiscreteJoint out;
  out.v_support.resize(static_cast<size_t>(mech.k()));
  for (Eigen::Index i = 0; i < mech.k(); ++i) {
    out.v_support[static_cast<size_t>(i)] = static_cast<double>(i);
  }
  out.x_support = joint.x_support;
  out.y_support = joint.y_support;
  out.table.assign(static_cast<size_t>(mech.k()) *
                       static_cast<size_t>(out.nx()) *
                       static_cast<size_t>(out.ny()),
                   0.0);
  out.pseudo_inverse_used = rectangular;

  for (Eigen::Index x = 0; x < out.nx(); ++x) {
    for (Eigen::Index y = 0; y < out.ny(); ++y) {
      Eigen::VectorXd slice_w(mech.r());
      for (Eigen::Index w = 0; w < mech.r(); ++w) slice_w(w) = joint.at(w, x, y);
      const double slice_mass = slice_w.sum();
      Eigen::VectorXd slice_u =
          rectangular ? Eigen::VectorXd(qr.solve(slice_w))
                      : Eigen::VectorXd(lu.solve(slice_w));
      double clipped_mass = 0.0;
      for (Eigen::Index u = 0; u < mech.k(); ++u) {
        if (slice_u(u) < -eps_clip) {
          throw DataError(
              "recovered probability mass is negative beyond tolerance; the "
              "joint is incompatible with the mechanism");
        }
        if (slice_u(u) < 0.0) slice_u(u) = 0.0;
        clipped_mass += slice_u(u);
      }
      if (clipped_mass > 0.0 && slice_mass > 0.0) {
        slice_u *= slice_mass / clipped_mass;
      }
      for (Eigen::Index u = 0; u < mech.k(); ++u) out.at(u, x, y) = slice_u(u);
    }
  }

  // Guard against mass drift introduced by clipping.
  const double mass = out.total_mass();
  if (mass > 0.0) {
    for (double& v : out.table) v /= mass;
  }
  return out;
}

double causal_function_discrete(const DiscreteJoint& joint_u, double x_level) {
  const Eigen::Index xi = level_index(joint_u.x_support, x_level);
  // Marginal p(u) and the conditional p(y | u, x) at the queried level.
  std::vector<double> p_u(static_cast<size_t>(joint_u.nv()), 0.0);
  for (Eigen::Index u = 0; u < joint_u.nv(); ++u) {
    for (Eigen::Index x = 0; x < joint_u.nx(); ++x) {
      for (Eigen::Index y = 0; y < joint_u.ny(); ++y) {
        p_u[static_cast<size_t>(u)] += joint_u.at(u, x, y);
      }
    }
  }
  double theta = 0.0;
  for (Eigen::Index u = 0; u < joint_u.nv(); ++u) {
    double p_ux = 0.0;
    for (Eigen::Index y = 0; y < joint_u.ny(); ++y) p_ux += joint_u.at(u, xi, y);
    if (!(p_ux > 0.0)) {
      throw DataError(
          "positivity violation: p(U = u, X = x) = 0 at the queried level");
    }
    double cond_mean = 0.0;
    for (Eigen::Index y = 0; y < joint_u.ny(); ++y) {
      cond_mean +=
          joint_u.y_support[static_cast<size_t>(y)] * joint_u.at(u, xi, y) / p_ux;
    }
    theta += cond_mean * p_u[static_cast<size_t>(u)];
  }
  return theta;
}

double ace_binary_discrete(const DiscreteJoint& joint_u) {
  if (joint_u.nx() != 2) {
    throw DataError("binary ACE requires exactly two treatment levels");
  }
  return causal_function_discrete(joint_u, joint_u.x_support[1]) -
         causal_function_discrete(joint_u, joint_u.x_support[0]);
}

}  // namespace spice
