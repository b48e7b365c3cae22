#include "spice/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spice/common.hpp"

namespace spice {

using nlohmann::json;

std::string to_string(TreatmentKind kind) {
  return kind == TreatmentKind::kBinary ? "binary" : "continuous";
}

TreatmentKind treatment_kind_from_string(const std::string& s) {
  if (s == "binary") return TreatmentKind::kBinary;
  if (s == "continuous") return TreatmentKind::kContinuous;
  throw ConfigError("unknown treatment kind: " + s);
}

namespace {

ColumnStats column_stats(const Eigen::VectorXd& col) {
  const double n = static_cast<double>(col.size());
  ColumnStats s;
  s.mean = col.mean();
  s.sd = std::sqrt((col.array() - s.mean).square().sum() / (n - 1.0));
  return s;
}

void standardize_column(Eigen::Ref<Eigen::VectorXd> col, ColumnStats& stats,
                        const char* name) {
  stats = column_stats(col);
  if (!(stats.sd > 0.0)) {
    throw DataError(std::string("degenerate (zero-variance) column: ") + name);
  }
  col = (col.array() - stats.mean) / stats.sd;
}

}  // namespace

Dataset standardize(const Dataset& data) {
  if (data.is_standardized()) {
    throw DataError("dataset is already standardized");
  }
  if (data.n() < 2) {
    throw DataError("standardization needs at least two rows");
  }
  Dataset out = data;
  Standardization meta;
  meta.w.resize(out.d());
  meta.x.resize(out.p());
  meta.u.resize(out.k());
  for (Eigen::Index j = 0; j < out.d(); ++j) {
    standardize_column(out.w.col(j), meta.w[j], "w");
  }
  for (Eigen::Index j = 0; j < out.p(); ++j) {
    if (data.treatment_kind == TreatmentKind::kBinary) {
      meta.x[j] = ColumnStats{};  // identity: binary treatment is never scaled
    } else {
      standardize_column(out.x.col(j), meta.x[j], "x");
    }
  }
  standardize_column(out.y, meta.y, "y");
  for (Eigen::Index j = 0; j < out.k(); ++j) {
    standardize_column(out.u.col(j), meta.u[j], "u");
  }
  out.standardization = std::move(meta);
  return out;
}

Dataset destandardize(const Dataset& data) {
  if (!data.is_standardized()) {
    throw DataError("dataset is not standardized");
  }
  Dataset out = data;
  const Standardization& meta = *data.standardization;
  for (Eigen::Index j = 0; j < out.d(); ++j) {
    out.w.col(j) = out.w.col(j).array() * meta.w[j].sd + meta.w[j].mean;
  }
  for (Eigen::Index j = 0; j < out.p(); ++j) {
    out.x.col(j) = out.x.col(j).array() * meta.x[j].sd + meta.x[j].mean;
  }
  out.y = out.y.array() * meta.y.sd + meta.y.mean;
  for (Eigen::Index j = 0; j < out.k(); ++j) {
    out.u.col(j) = out.u.col(j).array() * meta.u[j].sd + meta.u[j].mean;
  }
  out.standardization.reset();
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_cell(const std::string& cell, Eigen::Index row, size_t col) {
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
    throw DataError("non-numeric cell at row " + std::to_string(row + 2) +
                    ", column " + std::to_string(col + 1) + ": '" + cell + "'");
  }
  if (!std::isfinite(v)) {
    throw DataError("non-finite value at row " + std::to_string(row + 2) +
                    ", column " + std::to_string(col + 1));
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void write_dataset_csv(const Dataset& data, const std::string& path,
                       bool include_u) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  const bool with_u = include_u && data.has_hidden_confounder();
  for (Eigen::Index j = 0; j < data.d(); ++j) out << "w_" << (j + 1) << ",";
  for (Eigen::Index j = 0; j < data.p(); ++j) out << "x_" << (j + 1) << ",";
  out << "y";
  if (with_u) {
    for (Eigen::Index j = 0; j < data.k(); ++j) out << ",u_" << (j + 1);
  }
  out << "\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.d(); ++j) {
      out << format_double(data.w(i, j)) << ",";
    }
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      out << format_double(data.x(i, j)) << ",";
    }
    out << format_double(data.y(i));
    if (with_u) {
      for (Eigen::Index j = 0; j < data.k(); ++j) {
        out << "," << format_double(data.u(i, j));
      }
    }
    out << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_csv_line(line);
  Eigen::Index d = 0, p = 0, k = 0;
  bool seen_y = false;
  for (const auto& name : header) {
    if (name.rfind("w_", 0) == 0 && !seen_y) {
      ++d;
    } else if (name.rfind("x_", 0) == 0 && !seen_y) {
      ++p;
    } else if (name == "y" && !seen_y) {
      seen_y = true;
    } else if (name.rfind("u_", 0) == 0 && seen_y) {
      ++k;
    } else {
      throw DataError("unexpected CSV column '" + name + "' in " + path);
    }
  }
  if (!seen_y || d == 0 || p == 0) {
    throw DataError("CSV header must be w_1..w_d,x_1..x_p,y[,u_1..u_k]: " + path);
  }

  std::vector<std::vector<double>> rows;
  Eigen::Index row_index = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(row_index + 2) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    std::vector<double> row(cells.size());
    for (size_t c = 0; c < cells.size(); ++c) {
      row[c] = parse_cell(cells[c], row_index, c);
    }
    rows.push_back(std::move(row));
    ++row_index;
  }
  if (rows.empty()) throw DataError("no data rows in " + path);

  Dataset data;
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  data.w.resize(n, d);
  data.x.resize(n, p);
  data.y.resize(n);
  data.u.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    size_t c = 0;
    for (Eigen::Index j = 0; j < d; ++j) data.w(i, j) = rows[i][c++];
    for (Eigen::Index j = 0; j < p; ++j) data.x(i, j) = rows[i][c++];
    data.y(i) = rows[i][c++];
    for (Eigen::Index j = 0; j < k; ++j) data.u(i, j) = rows[i][c++];
  }
  return data;
}

namespace {

json stats_to_json(const ColumnStats& s) {
  return json{{"mean", s.mean}, {"sd", s.sd}};
}

ColumnStats stats_from_json(const json& j) {
  return ColumnStats{j.at("mean").get<double>(), j.at("sd").get<double>()};
}

json stats_vec_to_json(const std::vector<ColumnStats>& v) {
  json arr = json::array();
  for (const auto& s : v) arr.push_back(stats_to_json(s));
  return arr;
}

std::vector<ColumnStats> stats_vec_from_json(const json& arr) {
  std::vector<ColumnStats> v;
  for (const auto& j : arr) v.push_back(stats_from_json(j));
  return v;
}

}  // namespace

void write_dataset_manifest(const Dataset& data, const std::string& path) {
  json j{
      {"source", data.source},
      {"seed", data.seed},
      {"n", data.n()},
      {"dims", {{"d", data.d()}, {"p", data.p()}, {"k", data.k()}}},
      {"treatment_kind", to_string(data.treatment_kind)},
      {"standardized", data.is_standardized()},
  };
  if (data.is_standardized()) {
    const Standardization& m = *data.standardization;
    j["standardization"] = {{"w", stats_vec_to_json(m.w)},
                            {"x", stats_vec_to_json(m.x)},
                            {"y", stats_to_json(m.y)},
                            {"u", stats_vec_to_json(m.u)}};
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

void apply_dataset_manifest(Dataset& data, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("invalid manifest JSON " + path + ": " + e.what());
  }
  data.source = j.value("source", std::string("custom"));
  data.seed = j.value("seed", std::uint64_t{0});
  data.treatment_kind =
      treatment_kind_from_string(j.value("treatment_kind", std::string("continuous")));
  if (j.value("standardized", false)) {
    Standardization m;
    const json& s = j.at("standardization");
    m.w = stats_vec_from_json(s.at("w"));
    m.x = stats_vec_from_json(s.at("x"));
    m.y = stats_from_json(s.at("y"));
    m.u = stats_vec_from_json(s.at("u"));
    data.standardization = std::move(m);
  }
}

}  // namespace spice
