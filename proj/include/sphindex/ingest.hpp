#pragma once

// Tabular input: CSV reading and the compositional pipeline (square-root
// transform of proportions, log transforms, standardization and indicator
// coding of categorical covariates).

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "sphindex/config.hpp"
#include "sphindex/model.hpp"

namespace sphindex {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // UnknownColumn when absent.
  std::size_t column(const std::string& name) const;
};

// Header row first; lines starting with '#' are skipped. Double-quoted fields
// may contain commas.
CsvTable parse_csv(const std::string& text, const std::string& source = "<csv>");
CsvTable read_csv(const std::filesystem::path& path);

struct IngestedData {
  Eigen::MatrixXd X;  // coded predictors
  Eigen::MatrixXd Y;  // unit-vector responses
  std::vector<std::string> predictor_names;
  // Applied as (x - center) / scale after any log transform; indicators keep (0, 1).
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  std::vector<std::size_t> source_rows;  // data row -> table row
  // Non-reference levels per categorical column, in indicator order.
  std::vector<std::vector<std::string>> levels;

  Dataset dataset() const { return Dataset(X, Y); }
};

IngestedData ingest_composition(const CsvTable& table, const DataSpec& spec);
IngestedData ingest_composition_csv(const std::filesystem::path& path, const DataSpec& spec);

// Square roots of the row proportions; throws NegativeComposition or ZeroRowSum.
Eigen::VectorXd sqrt_composition(const Eigen::VectorXd& parts, std::size_t row = 0);

// Predictors of another table coded with the training transforms. Rows with
// dropped levels are removed; `kept` receives the surviving table rows.
Eigen::MatrixXd encode_predictors(const CsvTable& table, const DataSpec& spec, const IngestedData& train,
                                  std::vector<std::size_t>* kept = nullptr);
// Responses of the given table rows, transformed as in training.
Eigen::MatrixXd encode_responses(const CsvTable& table, const DataSpec& spec, const std::vector<std::size_t>& rows);

}  // namespace sphindex
