#include "sphindex/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sphindex/error.hpp"

namespace sphindex {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

double cell_number(const CsvTable& t, std::size_t row, std::size_t col) {
  const std::string& v = t.rows[row][col];
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x)) {
    throw Error(ErrorCode::DataError, "row " + std::to_string(row + 1) + ", column '" + t.header[col] +
                                          "': not a finite number ('" + v + "')");
  }
  return x;
}

bool dropped(const CsvTable& t, std::size_t row, const DataSpec& spec) {
  for (const auto& [col, level] : spec.drop_levels) {
    if (t.rows[row][t.column(col)] == level) return true;
  }
  return false;
}

// Log-transformed (where declared) continuous values, unstandardized.
double raw_continuous(const CsvTable& t, std::size_t row, const std::string& name, const DataSpec& spec) {
  double x = cell_number(t, row, t.column(name));
  if (std::find(spec.log_columns.begin(), spec.log_columns.end(), name) != spec.log_columns.end()) {
    if (!(x > 0.0)) {
      throw Error(ErrorCode::DataError,
                  "row " + std::to_string(row + 1) + ", column '" + name + "': log transform needs a positive value");
    }
    x = std::log(x);
  }
  return x;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::UnknownColumn, "no column named '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto fields = split_record(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::DataError, source + ":" + std::to_string(lineno) + ": expected " +
                                            std::to_string(t.header.size()) + " fields, found " +
                                            std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw Error(ErrorCode::DataError, source + ": no header row");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::DataError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path.string());
}

Eigen::VectorXd sqrt_composition(const Eigen::VectorXd& parts, std::size_t row) {
  for (Eigen::Index j = 0; j < parts.size(); ++j) {
    if (parts[j] < 0.0) {
      throw Error(ErrorCode::NegativeComposition,
                  "row " + std::to_string(row + 1) + ", part " + std::to_string(j + 1) + " is negative");
    }
  }
  const double total = parts.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroRowSum, "row " + std::to_string(row + 1) + " sums to zero");
  return (parts / total).cwiseSqrt();
}

Eigen::MatrixXd encode_responses(const CsvTable& table, const DataSpec& spec, const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> cols;
  for (const auto& name : spec.responses) cols.push_back(table.column(name));
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) v[static_cast<Eigen::Index>(j)] = cell_number(table, rows[i], cols[j]);
    if (spec.sqrt_transform) {
      if ((v.array() < 0.0).any()) {
        Eigen::Index j = 0;
        v.minCoeff(&j);
        throw Error(ErrorCode::NegativeComposition, "row " + std::to_string(rows[i] + 1) + ", column '" +
                                                        spec.responses[static_cast<std::size_t>(j)] + "' is negative");
      }
      v = sqrt_composition(v, rows[i]);
    } else {
      const double norm = v.norm();
      if (std::abs(norm - 1.0) > 1e-6) {
        throw Error(ErrorCode::DataError, "row " + std::to_string(rows[i] + 1) + ": response is not a unit vector");
      }
      v /= norm;
    }
    Y.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return Y;
}

Eigen::MatrixXd encode_predictors(const CsvTable& table, const DataSpec& spec, const IngestedData& train,
                                  std::vector<std::size_t>* kept) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (!dropped(table, r, spec)) rows.push_back(r);
  }
  const auto p = train.center.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    Eigen::Index j = 0;
    for (const auto& name : spec.continuous) X(static_cast<Eigen::Index>(i), j++) = raw_continuous(table, r, name, spec);
    for (std::size_t c = 0; c < spec.categorical.size(); ++c) {
      const auto& [name, reference] = spec.categorical[c];
      const std::string& value = table.rows[r][table.column(name)];
      const auto& levels = train.levels[c];
      const bool known = value == reference || std::find(levels.begin(), levels.end(), value) != levels.end();
      if (!known) {
        throw Error(ErrorCode::DataError,
                    "row " + std::to_string(r + 1) + ", column '" + name + "': level '" + value + "' unseen in training");
      }
      for (const auto& level : levels) X(static_cast<Eigen::Index>(i), j++) = value == level ? 1.0 : 0.0;
    }
  }
  for (Eigen::Index j = 0; j < p; ++j) X.col(j) = (X.col(j).array() - train.center[j]) / train.scale[j];
  if (kept) *kept = rows;
  return X;
}

IngestedData ingest_composition(const CsvTable& table, const DataSpec& spec) {
  if (spec.responses.size() < 3) throw Error(ErrorCode::ConfigError, "need at least 3 response columns");
  // Resolve every named column up front so a typo fails before any parsing.
  for (const auto& n : spec.responses) table.column(n);
  for (const auto& n : spec.continuous) table.column(n);
  for (const auto& n : spec.log_columns) {
    if (std::find(spec.continuous.begin(), spec.continuous.end(), n) == spec.continuous.end()) {
      throw Error(ErrorCode::UnknownColumn, "log column '" + n + "' is not a continuous covariate");
    }
  }
  for (const auto& c : spec.categorical) table.column(c.first);
  for (const auto& c : spec.drop_levels) table.column(c.first);

  IngestedData out;
  for (const auto& name : spec.continuous) out.predictor_names.push_back(name);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (!dropped(table, r, spec)) rows.push_back(r);
  }
  for (const auto& [name, reference] : spec.categorical) {
    const std::size_t col = table.column(name);
    std::set<std::string> seen;
    for (std::size_t r : rows) seen.insert(table.rows[r][col]);
    if (!seen.count(reference)) {
      throw Error(ErrorCode::DataError, "column '" + name + "': reference level '" + reference + "' does not occur");
    }
    std::vector<std::string> levels;
    for (const auto& level : seen) {
      if (level != reference) {
        levels.push_back(level);
        out.predictor_names.push_back(name + "_" + level);
      }
    }
    out.levels.push_back(std::move(levels));
  }
  const auto p = static_cast<Eigen::Index>(out.predictor_names.size());
  if (p < 2) throw Error(ErrorCode::ConfigError, "need at least 2 predictors after coding");

  out.center = Eigen::VectorXd::Zero(p);
  out.scale = Eigen::VectorXd::Ones(p);
  Eigen::MatrixXd X = encode_predictors(table, spec, out);
  const auto n = X.rows();
  if (n < 3) throw Error(ErrorCode::DataError, "fewer than 3 usable rows");
  if (spec.standardize) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(spec.continuous.size()); ++j) {
      const double mean = X.col(j).mean();
      const double sd = std::sqrt((X.col(j).array() - mean).square().sum() / static_cast<double>(n - 1));
      if (!(sd > 0.0)) {
        throw Error(ErrorCode::DataError, "column '" + spec.continuous[static_cast<std::size_t>(j)] + "' is constant");
      }
      out.center[j] = mean;
      out.scale[j] = sd;
      X.col(j) = (X.col(j).array() - mean) / sd;
    }
  }
  out.source_rows = rows;
  out.Y = encode_responses(table, spec, rows);
  out.X = std::move(X);
  out.dataset();  // validates shapes and unit norms
  return out;
}

IngestedData ingest_composition_csv(const std::filesystem::path& path, const DataSpec& spec) {
  return ingest_composition(read_csv(path), spec);
}

}  // namespace sphindex
